#include "pointseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pointseg {

namespace {

void require_same_dims(Dims a, Dims b, const char* what) {
    if (a != b) throw Error(std::string(what) + ": dimension mismatch");
}

// Pixel counts of every instance and of every (truth, pred) overlap.
struct Overlap {
    int truth_count = 0;
    int pred_count = 0;
    std::vector<long long> truth_area;  // index = id, [0] unused
    std::vector<long long> pred_area;
    std::vector<long long> inter;  // (truth_count + 1) x (pred_count + 1)
    // Present ids sorted by their first pixel in raster order, so results do not depend on id values.
    std::vector<int> truth_order;
    std::vector<int> pred_order;

    long long at(int t, int p) const { return inter[static_cast<std::size_t>(t) * (pred_count + 1) + p]; }
};

Overlap overlap(const InstanceMask& pred, const InstanceMask& truth) {
    Overlap o;
    for (const int v : truth) {
        if (v < 0) throw Error("instance ids must be non-negative");
        o.truth_count = std::max(o.truth_count, v);
    }
    for (const int v : pred) {
        if (v < 0) throw Error("instance ids must be non-negative");
        o.pred_count = std::max(o.pred_count, v);
    }
    o.truth_area.assign(static_cast<std::size_t>(o.truth_count) + 1, 0);
    o.pred_area.assign(static_cast<std::size_t>(o.pred_count) + 1, 0);
    o.inter.assign(static_cast<std::size_t>(o.truth_count + 1) * (o.pred_count + 1), 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++o.truth_area[static_cast<std::size_t>(truth[i])];
        ++o.pred_area[static_cast<std::size_t>(pred[i])];
        ++o.inter[static_cast<std::size_t>(truth[i]) * (o.pred_count + 1) + pred[i]];
    }
    std::vector<bool> seen_t(o.truth_area.size(), false), seen_p(o.pred_area.size(), false);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]), p = static_cast<std::size_t>(pred[i]);
        if (t > 0 && !seen_t[t]) {
            seen_t[t] = true;
            o.truth_order.push_back(static_cast<int>(t));
        }
        if (p > 0 && !seen_p[p]) {
            seen_p[p] = true;
            o.pred_order.push_back(static_cast<int>(p));
        }
    }
    return o;
}

// Weighted best-overlap Dice of every object in one mask against the other.
double one_sided_dice(const Overlap& o, bool truth_side) {
    const std::vector<int>& own = truth_side ? o.truth_order : o.pred_order;
    const std::vector<int>& other = truth_side ? o.pred_order : o.truth_order;
    const auto& own_area = truth_side ? o.truth_area : o.pred_area;
    const auto& other_area = truth_side ? o.pred_area : o.truth_area;
    long long total = 0;
    for (const int i : own) total += own_area[static_cast<std::size_t>(i)];
    if (total == 0) return 0.0;
    double sum = 0.0;
    for (const int i : own) {
        const long long area = own_area[static_cast<std::size_t>(i)];
        long long best = 0;
        int best_j = 0;
        for (const int j : other) {
            const long long inter = truth_side ? o.at(i, j) : o.at(j, i);
            if (inter > best) {
                best = inter;
                best_j = j;
            }
        }
        if (best_j == 0) continue;
        const double dice = 2.0 * static_cast<double>(best) /
                            static_cast<double>(area + other_area[static_cast<std::size_t>(best_j)]);
        sum += static_cast<double>(area) * dice;
    }
    // Dividing once keeps a perfect match at exactly 1.
    return sum / static_cast<double>(total);
}

}  // namespace

BinaryMask foreground(const InstanceMask& instances) {
    BinaryMask m(instances.dims(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = instances[i] > 0 ? 1 : 0;
    return m;
}

PixelScores pixel_metrics(const BinaryMask& pred, const BinaryMask& truth) {
    require_same_dims(pred.dims(), truth.dims(), "pixel_metrics");
    long long tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, t = truth[i] != 0;
        correct += p == t;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    PixelScores s;
    s.acc = pred.size() ? static_cast<double>(correct) / static_cast<double>(pred.size()) : 1.0;
    if (tp + fp + fn == 0) {
        s.f1 = {1.0, true};
    } else {
        s.f1.value = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return s;
}

Score aji(const InstanceMask& pred, const InstanceMask& truth) {
    require_same_dims(pred.dims(), truth.dims(), "aji");
    const Overlap o = overlap(pred, truth);
    const long long truth_pixels =
        std::accumulate(o.truth_area.begin() + 1, o.truth_area.end(), 0LL);
    const long long pred_pixels = std::accumulate(o.pred_area.begin() + 1, o.pred_area.end(), 0LL);
    if (truth_pixels == 0) return pred_pixels == 0 ? Score{1.0, true} : Score{0.0, false};

    std::vector<bool> used(static_cast<std::size_t>(o.pred_count) + 1, false);
    long long intersection = 0, union_ = 0;
    for (const int t : o.truth_order) {
        const long long ta = o.truth_area[static_cast<std::size_t>(t)];
        int best = 0;
        long long best_i = 0, best_u = 1;
        for (const int p : o.pred_order) {
            const long long i = o.at(t, p);
            if (used[static_cast<std::size_t>(p)] || i == 0) continue;
            const long long u = ta + o.pred_area[static_cast<std::size_t>(p)] - i;
            // i / u > best_i / best_u, compared exactly
            if (best == 0 || i * best_u > best_i * u) {
                best = p;
                best_i = i;
                best_u = u;
            }
        }
        if (best == 0) {
            union_ += ta;
        } else {
            used[static_cast<std::size_t>(best)] = true;
            intersection += best_i;
            union_ += best_u;
        }
    }
    for (int p = 1; p <= o.pred_count; ++p) {
        if (!used[static_cast<std::size_t>(p)]) union_ += o.pred_area[static_cast<std::size_t>(p)];
    }
    return {static_cast<double>(intersection) / static_cast<double>(union_), false};
}

Score object_dice(const InstanceMask& pred, const InstanceMask& truth) {
    require_same_dims(pred.dims(), truth.dims(), "object_dice");
    const Overlap o = overlap(pred, truth);
    const long long truth_pixels =
        std::accumulate(o.truth_area.begin() + 1, o.truth_area.end(), 0LL);
    const long long pred_pixels = std::accumulate(o.pred_area.begin() + 1, o.pred_area.end(), 0LL);
    if (truth_pixels == 0 && pred_pixels == 0) return {1.0, true};
    return {0.5 * (one_sided_dice(o, true) + one_sided_dice(o, false)), false};
}

std::vector<int> min_cost_assignment(const std::vector<double>& cost, int rows, int cols) {
    if (rows > cols) throw Error("min_cost_assignment: rows must not exceed cols");
    if (rows == 0) return {};
    // Shortest augmenting path form of the Hungarian method, 1-based potentials.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(rows) + 1, 0.0), v(static_cast<std::size_t>(cols) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(cols) + 1, 0), way(static_cast<std::size_t>(cols) + 1, 0);
    for (int i = 1; i <= rows; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(cols) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(cols) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= cols; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1) * cols + (j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= cols; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(static_cast<std::size_t>(rows), -1);
    for (int j = 1; j <= cols; ++j) {
        if (match[static_cast<std::size_t>(j)] != 0) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
    return assignment;
}

DetReport detection_metrics(const DetectionSet& pred, const PointSet& truth, double radius) {
    if (!(radius > 0.0)) throw Error("detection_metrics: radius must be > 0");
    DetReport rep;
    const bool pred_rows = pred.size() <= truth.size();
    const int rows = static_cast<int>(pred_rows ? pred.size() : truth.size());
    const int cols = static_cast<int>(pred_rows ? truth.size() : pred.size());
    int matched = 0;
    if (rows > 0) {
        // Out-of-radius pairs cost more than any full set of in-radius pairs, so the
        // optimum maximizes the number of matches first.
        const double blocked = (radius + 1.0) * (rows + 1);
        std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
        std::vector<bool> feasible(cost.size());
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                const Detection& d = pred[static_cast<std::size_t>(pred_rows ? i : j)];
                const Point& t = truth[static_cast<std::size_t>(pred_rows ? j : i)];
                const double dist = std::hypot(d.x - t.x, d.y - t.y);
                const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                feasible[k] = dist <= radius;
                cost[k] = feasible[k] ? dist : blocked;
            }
        }
        const std::vector<int> assignment = min_cost_assignment(cost, rows, cols);
        for (int i = 0; i < rows; ++i) {
            const int j = assignment[static_cast<std::size_t>(i)];
            if (j >= 0 && feasible[static_cast<std::size_t>(i) * cols + j]) ++matched;
        }
    }
    rep.tp = matched;
    rep.fp = static_cast<int>(pred.size()) - matched;
    rep.fn = static_cast<int>(truth.size()) - matched;
    rep.precision = pred.empty() ? (truth.empty() ? 1.0 : 0.0) : static_cast<double>(rep.tp) / (rep.tp + rep.fp);
    rep.recall = truth.empty() ? 1.0 : static_cast<double>(rep.tp) / (rep.tp + rep.fn);
    return rep;
}

Score ccc(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("ccc needs two equally long sequences of length >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
        cov += (x[i] - mx) * (y[i] - my);
    }
    vx /= n;
    vy /= n;
    cov /= n;
    const double denom = vx + vy + (mx - my) * (mx - my);
    if (vx == 0.0 && vy == 0.0) return {mx == my ? 1.0 : 0.0, true};
    return {2.0 * cov / denom, false};
}

}  // namespace pointseg
