#include "pointseg/encode.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace pointseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist2(double x0, double y0, double x1, double y1) {
    const double dx = x0 - x1;
    const double dy = y0 - y1;
    return dx * dx + dy * dy;
}

void require_points(const PointSet& points, Dims dims) {
    if (points.empty()) throw Error("no annotations");
    validate_points(points, dims);
}

using Feature = std::array<double, 4>;

double feature_dist2(const Feature& a, const Feature& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

// Two-centroid Lloyd iteration. Returns per-sample assignment (0 or 1).
template <std::size_t N>
std::vector<std::uint8_t> two_means(const std::vector<std::array<double, N>>& samples, std::array<double, N> c0,
                                    std::array<double, N> c1, int max_iterations) {
    auto d2 = [](const std::array<double, N>& a, const std::array<double, N>& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < N; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return s;
    };
    std::vector<std::uint8_t> assign(samples.size(), 0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::uint8_t a = d2(samples[i], c1) < d2(samples[i], c0) ? 1 : 0;
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        if (!changed) break;
        std::array<double, N> s0{}, s1{};
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto& s = assign[i] ? s1 : s0;
            for (std::size_t k = 0; k < N; ++k) s[k] += samples[i][k];
            (assign[i] ? n1 : n0)++;
        }
        for (std::size_t k = 0; k < N; ++k) {
            if (n0) c0[k] = s0[k] / static_cast<double>(n0);
            if (n1) c1[k] = s1[k] / static_cast<double>(n1);
        }
    }
    return assign;
}

}  // namespace

void RepelParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("repel alpha must be > 0");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw Error("repel radius must be > 0");
}

VoronoiPartition voronoi_partition(const PointSet& points, Dims dims) {
    require_points(points, dims);
    VoronoiPartition out{Grid<int>(dims, 0), Grid<std::uint8_t>(dims, 0)};
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            double best = kInf;
            int best_id = 0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = dist2(c, r, points[i].x, points[i].y);
                if (d < best) {
                    best = d;
                    best_id = static_cast<int>(i);
                }
            }
            out.region_id(r, c) = best_id;
        }
    }
    const Grid<int>& id = out.region_id;
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            const int v = id(r, c);
            const bool boundary = (r > 0 && id(r - 1, c) != v) || (r + 1 < dims.height && id(r + 1, c) != v) ||
                                  (c > 0 && id(r, c - 1) != v) || (c + 1 < dims.width && id(r, c + 1) != v);
            out.line_mask(r, c) = boundary ? 1 : 0;
        }
    }
    return out;
}

VoronoiEncoding voronoi_encode(const PointSet& points, Dims dims, double dot_radius) {
    VoronoiEncoding enc{voronoi_partition(points, dims), TriStateLabelMap(dims, Label::Ignored)};
    for (std::size_t i = 0; i < enc.target.size(); ++i) {
        if (enc.partition.line_mask[i]) enc.target[i] = Label::Background;
    }
    const double r2 = dot_radius * dot_radius;
    const int reach = static_cast<int>(std::ceil(dot_radius));
    for (const Point& p : points) {
        const PixelPos center = pixel_of(p, dims);
        for (int r = center.row - reach - 1; r <= center.row + reach + 1; ++r) {
            for (int c = center.col - reach - 1; c <= center.col + reach + 1; ++c) {
                if (dims.contains(r, c) && dist2(c, r, p.x, p.y) <= r2) enc.target(r, c) = Label::Foreground;
            }
        }
        enc.target(center.row, center.col) = Label::Foreground;
    }
    return enc;
}

ClusterEncoding local_cluster_encode(const ImageRGB& image, const PointSet& points, const VoronoiPartition& partition,
                                     const LocalClusterOptions& options) {
    const Dims dims = image.dims();
    if (partition.region_id.dims() != dims || partition.line_mask.dims() != dims) {
        throw Error("partition dimensions do not match image");
    }
    require_points(points, dims);

    ClusterEncoding out{TriStateLabelMap(dims, Label::Background), {}};

    std::vector<std::vector<std::size_t>> members(points.size());
    for (std::size_t i = 0; i < partition.region_id.size(); ++i) {
        const int id = partition.region_id[i];
        if (id < 0 || static_cast<std::size_t>(id) >= points.size()) throw Error("partition does not match points");
        members[static_cast<std::size_t>(id)].push_back(i);
    }

    const double r2 = options.dot_radius * options.dot_radius;
    for (std::size_t region = 0; region < points.size(); ++region) {
        const Point& p = points[region];
        const std::vector<std::size_t>& pix = members[region];
        const PixelPos anchor_pos = pixel_of(p, dims);
        const std::size_t anchor = image.index(anchor_pos.row, anchor_pos.col);

        auto fallback = [&](const char* reason) {
            for (std::size_t idx : pix) {
                const int r = static_cast<int>(idx / static_cast<std::size_t>(dims.width));
                const int c = static_cast<int>(idx % static_cast<std::size_t>(dims.width));
                if (dist2(c, r, p.x, p.y) <= r2 || idx == anchor) out.target[idx] = Label::Foreground;
            }
            out.fallbacks.push_back({static_cast<int>(region), reason});
        };

        if (partition.region_id[anchor] != static_cast<int>(region)) {
            fallback("annotation pixel outside its own region");
            continue;
        }

        double max_dist = 0.0;
        std::vector<double> dist(pix.size());
        for (std::size_t k = 0; k < pix.size(); ++k) {
            const int r = static_cast<int>(pix[k] / static_cast<std::size_t>(dims.width));
            const int c = static_cast<int>(pix[k] % static_cast<std::size_t>(dims.width));
            dist[k] = std::sqrt(dist2(c, r, p.x, p.y));
            max_dist = std::max(max_dist, dist[k]);
        }

        std::vector<Feature> features(pix.size());
        std::size_t anchor_k = 0;
        for (std::size_t k = 0; k < pix.size(); ++k) {
            const Rgb px = image[pix[k]];
            const double dn = max_dist > 0.0 ? dist[k] / max_dist : 0.0;
            features[k] = {px.r / 255.0, px.g / 255.0, px.b / 255.0, options.distance_weight * dn};
            if (pix[k] == anchor) anchor_k = k;
        }

        const Feature& seed_fg = features[anchor_k];
        std::size_t far_k = anchor_k;
        double far_d = 0.0;
        for (std::size_t k = 0; k < features.size(); ++k) {
            const double d = feature_dist2(features[k], seed_fg);
            if (d > far_d) {
                far_d = d;
                far_k = k;
            }
        }
        if (far_d == 0.0) {
            fallback("uniform features");
            continue;
        }

        const std::vector<std::uint8_t> assign =
            two_means<4>(features, seed_fg, features[far_k], options.max_iterations);
        const std::uint8_t fg_cluster = assign[anchor_k];
        for (std::size_t k = 0; k < pix.size(); ++k) {
            out.target[pix[k]] = assign[k] == fg_cluster ? Label::Foreground : Label::Background;
        }
    }
    return out;
}

TriStateLabelMap global_cluster_baseline(const ImageRGB& image, const PointSet& points, std::uint64_t seed) {
    const Dims dims = image.dims();
    require_points(points, dims);
    using Rgbd = std::array<double, 3>;
    std::vector<Rgbd> samples(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        samples[i] = {image[i].r / 255.0, image[i].g / 255.0, image[i].b / 255.0};
    }

    // k-means++ seeding: first centroid uniform, second proportional to squared distance.
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const Rgbd c0 = samples[pick(rng)];
    std::vector<double> weights(samples.size());
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += (samples[i][k] - c0[k]) * (samples[i][k] - c0[k]);
        weights[i] = d;
        total += d;
    }
    if (total == 0.0) throw Error("degenerate global clustering");
    std::discrete_distribution<std::size_t> by_distance(weights.begin(), weights.end());
    const Rgbd c1 = samples[by_distance(rng)];

    const std::vector<std::uint8_t> assign = two_means<3>(samples, c0, c1, 100);
    std::array<double, 2> brightness{0.0, 0.0};
    std::array<std::size_t, 2> count{0, 0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        brightness[assign[i]] += samples[i][0] + samples[i][1] + samples[i][2];
        ++count[assign[i]];
    }
    if (count[0] == 0 || count[1] == 0) throw Error("degenerate global clustering");
    const std::uint8_t dark = brightness[1] / count[1] < brightness[0] / count[0] ? 1 : 0;

    TriStateLabelMap out(dims, Label::Background);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (assign[i] == dark) out[i] = Label::Foreground;
    }
    return out;
}

double repel_value(double d1, double d2, const RepelParams& params) {
    if (d1 >= params.radius) return 0.0;
    const double decay = (1.0 - d1 / params.radius) * (1.0 - d1 / params.radius);
    if (std::isinf(d2)) return std::clamp(decay, 0.0, 1.0);
    const double compress = (d2 - d1) / (d2 + d1 + params.alpha * params.radius);
    return std::clamp(decay * compress, 0.0, 1.0);
}

RepelMap repel_encode(const PointSet& points, Dims dims, const RepelParams& params) {
    params.validate();
    require_points(points, dims);
    RepelMap out(dims, 0.0);
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            double d1 = kInf, d2 = kInf;
            for (const Point& p : points) {
                const double d = dist2(c, r, p.x, p.y);
                if (d < d1) {
                    d2 = d1;
                    d1 = d;
                } else if (d < d2) {
                    d2 = d;
                }
            }
            out(r, c) = repel_value(std::sqrt(d1), std::sqrt(d2), params);
        }
    }
    return out;
}

RepelMap filtered_repel(const RepelMap& repel, const TriStateLabelMap& cluster) {
    if (repel.dims() != cluster.dims()) throw Error("filtered_repel: dimension mismatch");
    RepelMap out(repel.dims(), 0.0);
    for (std::size_t i = 0; i < repel.size(); ++i) {
        if (cluster[i] == Label::Foreground) out[i] = repel[i];
    }
    return out;
}

}  // namespace pointseg
