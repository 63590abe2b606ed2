#include "pointseg/post.hpp"

#include <algorithm>
#include <deque>

namespace pointseg {

BinaryMask argmax_mask(const ProbabilityMap& prob) {
    BinaryMask mask(prob.dims(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = prob.nuclei[i] > prob.background[i] ? 1 : 0;
    return mask;
}

InstanceMask extract_instances(const BinaryMask& mask) {
    const Dims dims = mask.dims();
    InstanceMask ids(dims, 0);
    int next = 0;
    std::deque<PixelPos> queue;
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            if (!mask(r, c) || ids(r, c) != 0) continue;
            ids(r, c) = ++next;
            queue.push_back({r, c});
            while (!queue.empty()) {
                const PixelPos p = queue.front();
                queue.pop_front();
                constexpr int dr[4] = {-1, 1, 0, 0};
                constexpr int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int nr = p.row + dr[k], nc = p.col + dc[k];
                    if (dims.contains(nr, nc) && mask(nr, nc) && ids(nr, nc) == 0) {
                        ids(nr, nc) = next;
                        queue.push_back({nr, nc});
                    }
                }
            }
        }
    }
    return ids;
}

int instance_count(const InstanceMask& instances) {
    int k = 0;
    for (const int v : instances) k = std::max(k, v);
    return k;
}

DetectionSet detect_cells(const ProbabilityMap& prob, int min_distance, double threshold) {
    if (min_distance < 1) throw Error("detect_cells: min_distance must be >= 1");
    const Grid<double>& v = prob.nuclei;
    const Dims dims = v.dims();

    // Separable sliding maximum over the (2d+1)^2 window.
    Grid<double> row_max(dims, 0.0), win_max(dims, 0.0);
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            double m = v(r, c);
            for (int k = std::max(0, c - min_distance); k <= std::min(dims.width - 1, c + min_distance); ++k) {
                m = std::max(m, v(r, k));
            }
            row_max(r, c) = m;
        }
    }
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            double m = row_max(r, c);
            for (int k = std::max(0, r - min_distance); k <= std::min(dims.height - 1, r + min_distance); ++k) {
                m = std::max(m, row_max(k, c));
            }
            win_max(r, c) = m;
        }
    }

    DetectionSet candidates;
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            if (v(r, c) >= threshold && v(r, c) == win_max(r, c)) candidates.push_back({c, r, v(r, c)});
        }
    }
    // Stable: equal scores keep raster order, so the first pixel of a plateau wins.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });

    DetectionSet kept;
    const long long min2 = static_cast<long long>(min_distance) * min_distance;
    for (const Detection& d : candidates) {
        const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Detection& k) {
            const long long dx = d.x - k.x, dy = d.y - k.y;
            return dx * dx + dy * dy >= min2;
        });
        if (clear) kept.push_back(d);
    }
    return kept;
}

}  // namespace pointseg
