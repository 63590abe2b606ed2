#pragma once

// Brute-force reference implementations shared by the unit tests and the acceptance run.
// They favour obviousness over speed and deliberately avoid the library's own helpers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "pointseg/grid.hpp"
#include "pointseg/loss.hpp"
#include "pointseg/post.hpp"

namespace oracle {

using namespace pointseg;

// Nearest annotation per pixel, ties to the lowest index.
inline Grid<int> nearest_point(const PointSet& points, Dims dims) {
    Grid<int> out(dims, -1);
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            long double best = std::numeric_limits<long double>::max();
            for (std::size_t i = 0; i < points.size(); ++i) {
                const long double dx = c - static_cast<long double>(points[i].x);
                const long double dy = r - static_cast<long double>(points[i].y);
                const long double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    out(r, c) = static_cast<int>(i);
                }
            }
        }
    }
    return out;
}

// Pixels whose 4-neighbourhood crosses a region boundary.
inline Grid<std::uint8_t> boundary(const Grid<int>& regions) {
    Grid<std::uint8_t> out(regions.dims(), 0);
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int r = 0; r < regions.height(); ++r) {
        for (int c = 0; c < regions.width(); ++c) {
            for (int k = 0; k < 4; ++k) {
                const int rr = r + dr[k], cc = c + dc[k];
                if (regions.dims().contains(rr, cc) && regions(rr, cc) != regions(r, c)) out(r, c) = 1;
            }
        }
    }
    return out;
}

// ---- losses, summed in long double in a single pass ------------------------

// The clamp bounds are doubles, so clamp in double before widening.
inline long double clamp_p(double o) { return std::min(std::max(o, 1e-7), 1.0 - 1e-7); }

inline double bce(const TriStateLabelMap& t, const ProbabilityMap& o, bool skip_ignored) {
    long double sum = 0.0L;
    long long n = 0;
    for (int r = 0; r < t.height(); ++r) {
        for (int c = 0; c < t.width(); ++c) {
            if (t(r, c) == Label::Ignored) {
                if (skip_ignored) continue;
                return std::numeric_limits<double>::quiet_NaN();
            }
            const long double p = clamp_p(o.nuclei(r, c));
            sum += t(r, c) == Label::Foreground ? -std::log(p) : -std::log(1.0L - p);
            ++n;
        }
    }
    return static_cast<double>(sum / n);
}

inline double mse(const RepelMap& t, const ProbabilityMap& o) {
    long double sum = 0.0L;
    for (int r = 0; r < t.height(); ++r) {
        for (int c = 0; c < t.width(); ++c) {
            const long double d = static_cast<long double>(o.nuclei(r, c)) - t(r, c);
            sum += d * d;
        }
    }
    return static_cast<double>(sum / static_cast<long double>(t.size()));
}

// ---- instance metrics over explicit pixel sets ------------------------------

using PixelSet = std::set<std::pair<int, int>>;

// Objects keyed by their first pixel in raster order; ids themselves never matter.
using Objects = std::map<std::pair<int, int>, PixelSet>;

inline Objects objects(const InstanceMask& m) {
    std::map<int, PixelSet> by_id;
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            if (m(r, c) > 0) by_id[m(r, c)].insert({r, c});
        }
    }
    Objects out;
    for (auto& [id, px] : by_id) out.emplace(*px.begin(), std::move(px));
    return out;
}

inline std::size_t intersection(const PixelSet& a, const PixelSet& b) {
    std::size_t n = 0;
    for (const auto& p : a) n += b.count(p);
    return n;
}

inline std::size_t union_size(const PixelSet& a, const PixelSet& b) { return a.size() + b.size() - intersection(a, b); }

// Truth objects in raster order each claim the still-unclaimed prediction with the highest IoU
// (first on ties, IoU must be positive); unclaimed predictions join the union.
inline double aji(const InstanceMask& pred, const InstanceMask& truth) {
    const auto P = objects(pred), T = objects(truth);
    if (T.empty()) return P.empty() ? 1.0 : 0.0;
    std::set<std::pair<int, int>> claimed;
    std::size_t inter = 0, uni = 0;
    for (const auto& [tid, tpx] : T) {
        const PixelSet* best = nullptr;
        std::pair<int, int> best_key;
        double best_iou = 0.0;
        for (const auto& [pid, ppx] : P) {
            if (claimed.count(pid)) continue;
            const std::size_t i = intersection(tpx, ppx);
            if (i == 0) continue;
            const double iou = static_cast<double>(i) / static_cast<double>(union_size(tpx, ppx));
            if (!best || iou > best_iou) {
                best = &ppx;
                best_key = pid;
                best_iou = iou;
            }
        }
        if (!best) {
            uni += tpx.size();
        } else {
            claimed.insert(best_key);
            inter += intersection(tpx, *best);
            uni += union_size(tpx, *best);
        }
    }
    for (const auto& [pid, ppx] : P) {
        if (!claimed.count(pid)) uni += ppx.size();
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double dice_one_side(const Objects& own, const Objects& other) {
    std::size_t total = 0;
    for (const auto& [id, px] : own) total += px.size();
    if (total == 0) return 0.0;
    double sum = 0.0;
    for (const auto& [id, px] : own) {
        std::size_t best = 0;
        const PixelSet* match = nullptr;
        for (const auto& [oid, opx] : other) {
            const std::size_t i = intersection(px, opx);
            if (i > best) {
                best = i;
                match = &opx;
            }
        }
        if (!match) continue;
        sum += static_cast<double>(px.size()) / static_cast<double>(total) * 2.0 * static_cast<double>(best) /
               static_cast<double>(px.size() + match->size());
    }
    return sum;
}

inline double object_dice(const InstanceMask& pred, const InstanceMask& truth) {
    const auto P = objects(pred), T = objects(truth);
    if (P.empty() && T.empty()) return 1.0;
    return 0.5 * (dice_one_side(T, P) + dice_one_side(P, T));
}

// ---- CCC from raw moments --------------------------------------------------

inline double ccc(const std::vector<double>& x, const std::vector<double>& y) {
    const long double n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double mx = sx / n, my = sy / n;
    const long double vx = sxx / n - mx * mx, vy = syy / n - my * my, cov = sxy / n - mx * my;
    return static_cast<double>(2 * cov / (vx + vy + (mx - my) * (mx - my)));
}

// ---- detection matching by exhaustive search --------------------------------

struct Matching {
    int tp = 0;
    double total_distance = 0.0;
};

// Largest one-to-one matching within `radius`; among those, the smallest total distance.
inline Matching best_matching(const DetectionSet& pred, const PointSet& truth, double radius) {
    Matching best;
    std::vector<bool> used(truth.size(), false);
    std::function<void(std::size_t, int, double)> go = [&](std::size_t i, int tp, double dist) {
        if (i == pred.size()) {
            if (tp > best.tp || (tp == best.tp && dist < best.total_distance - 1e-12)) best = {tp, dist};
            return;
        }
        go(i + 1, tp, dist);
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (used[j]) continue;
            const double d = std::hypot(pred[i].x - truth[j].x, pred[i].y - truth[j].y);
            if (d > radius) continue;
            used[j] = true;
            go(i + 1, tp + 1, dist + d);
            used[j] = false;
        }
    };
    go(0, 0, 0.0);
    return best;
}

// ---- random instance layouts -------------------------------------------------

// Up to `max_objects` random rectangles and blobs; later objects overwrite earlier ones,
// and ids are shuffled so they need not follow raster order or be contiguous.
inline InstanceMask random_layout(std::mt19937_64& rng, Dims dims, int max_objects) {
    InstanceMask m(dims, 0);
    std::uniform_int_distribution<int> count(0, max_objects);
    std::uniform_int_distribution<int> row(0, dims.height - 1), col(0, dims.width - 1), side(1, 6);
    std::uniform_int_distribution<int> id_pick(1, 9);
    const int n = count(rng);
    std::set<int> ids;
    while (static_cast<int>(ids.size()) < n) ids.insert(id_pick(rng));
    std::vector<int> order(ids.begin(), ids.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (int id : order) {
        const int r0 = row(rng), c0 = col(rng), h = side(rng), w = side(rng);
        const bool blob = rng() % 2;
        for (int r = r0; r < std::min(dims.height, r0 + h); ++r) {
            for (int c = c0; c < std::min(dims.width, c0 + w); ++c) {
                if (blob && rng() % 4 == 0) continue;
                m(r, c) = id;
            }
        }
    }
    return m;
}

}  // namespace oracle
