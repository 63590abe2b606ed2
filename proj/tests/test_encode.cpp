#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pointseg/encode.hpp"

using namespace pointseg;

namespace {

PointSet random_points(std::mt19937_64& rng, Dims dims, int max_points) {
    std::uniform_int_distribution<int> count(1, max_points);
    std::uniform_real_distribution<double> x(0.0, dims.width - 1), y(0.0, dims.height - 1);
    const int n = count(rng);
    PointSet pts;
    std::set<std::pair<int, int>> taken;
    while (static_cast<int>(pts.size()) < n) {
        const Point p{x(rng), y(rng)};
        const PixelPos px = pixel_of(p, dims);
        if (taken.insert({px.row, px.col}).second) pts.push_back(p);
    }
    return pts;
}

ImageRGB disk_image(Dims dims, double cx, double cy, double radius, Rgb inside, Rgb outside) {
    ImageRGB img(dims, outside);
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            if (std::hypot(c - cx, r - cy) <= radius) img(r, c) = inside;
        }
    }
    return img;
}

}  // namespace

TEST_CASE("voronoi: single point has no boundary and one disk") {
    const Dims dims{64, 64};
    const VoronoiEncoding enc = voronoi_encode({{20, 30}}, dims, 2.0);
    int fg = 0, line = 0;
    for (std::size_t i = 0; i < dims.area(); ++i) {
        CHECK(enc.partition.region_id[i] == 0);
        line += enc.partition.line_mask[i];
        fg += enc.target[i] == Label::Foreground;
        CHECK(enc.target[i] != Label::Background);
    }
    CHECK(line == 0);
    CHECK(fg == 13);  // lattice points within radius 2
    CHECK(enc.target(30, 20) == Label::Foreground);
}

TEST_CASE("voronoi: two points split along the mid column band") {
    const Dims dims{64, 64};
    const VoronoiEncoding enc = voronoi_encode({{10, 32}, {30, 32}}, dims, 2.0);
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            CHECK(enc.partition.region_id(r, c) == (c <= 20 ? 0 : 1));  // x = 20 is a tie, lower index wins
            CHECK(enc.partition.line_mask(r, c) == ((c == 20 || c == 21) ? 1 : 0));
            if (c == 20 || c == 21) CHECK(enc.target(r, c) == Label::Background);
        }
    }
}

TEST_CASE("voronoi: partition matches brute force on random layouts") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const Dims dims{8 + static_cast<int>(rng() % 57), 8 + static_cast<int>(rng() % 57)};
        const PointSet pts = random_points(rng, dims, 20);
        const VoronoiPartition part = voronoi_partition(pts, dims);
        const Grid<int> truth = oracle::nearest_point(pts, dims);
        CHECK(part.region_id == truth);
        CHECK(part.line_mask == oracle::boundary(truth));
    }
}

TEST_CASE("voronoi: disk pixels are foreground even on a boundary") {
    // Points 3 px apart: their disks straddle the partition line.
    const VoronoiEncoding enc = voronoi_encode({{10, 10}, {13, 10}}, {24, 24}, 2.0);
    for (int r = 0; r < 24; ++r) {
        for (int c = 0; c < 24; ++c) {
            const bool in_disk = std::hypot(c - 10.0, r - 10.0) <= 2.0 || std::hypot(c - 13.0, r - 10.0) <= 2.0;
            if (in_disk) CHECK(enc.target(r, c) == Label::Foreground);
        }
    }
}

TEST_CASE("voronoi: rejects empty and out-of-range annotations") {
    CHECK_THROWS_AS(voronoi_encode({}, {8, 8}), Error);
    CHECK_THROWS_AS(voronoi_encode({{8.0, 1.0}}, {8, 8}), Error);
    CHECK_THROWS_AS(voronoi_encode({{1.0, 1.0}, {1.2, 0.9}}, {8, 8}), Error);
}

TEST_CASE("local clustering: dark disk on white matches an intensity-threshold oracle") {
    const Dims dims{32, 32};
    const ImageRGB img = disk_image(dims, 15, 15, 5.0, {60, 60, 60}, {250, 250, 250});
    const PointSet pts{{15, 15}};
    const ClusterEncoding enc = local_cluster_encode(img, pts, voronoi_partition(pts, dims));
    CHECK(enc.fallbacks.empty());
    // Oracle: threshold halfway between the two region-local mean intensities.
    double dark = 0, light = 0;
    int nd = 0, nl = 0;
    for (const Rgb& p : img) {
        (p.r < 128 ? dark : light) += p.r;
        (p.r < 128 ? nd : nl)++;
    }
    const double mid = 0.5 * (dark / nd + light / nl);
    int mismatched_far_from_edge = 0;
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
            const bool oracle_fg = img(r, c).r < mid;
            const bool got_fg = enc.target(r, c) == Label::Foreground;
            if (oracle_fg != got_fg && std::abs(std::hypot(c - 15.0, r - 15.0) - 5.0) > 2.0) ++mismatched_far_from_edge;
        }
    }
    CHECK(mismatched_far_from_edge == 0);
}

TEST_CASE("local clustering: uniform region falls back to a disk and is logged") {
    const Dims dims{16, 16};
    const ImageRGB img(dims, Rgb{200, 200, 200});
    const PointSet pts{{8, 8}};
    LocalClusterOptions opts;
    opts.distance_weight = 0.0;  // no distance feature, so every feature vector is identical
    const ClusterEncoding enc = local_cluster_encode(img, pts, voronoi_partition(pts, dims), opts);
    REQUIRE(enc.fallbacks.size() == 1);
    CHECK(enc.fallbacks[0].region == 0);
    int fg = 0;
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
            const bool in_disk = std::hypot(c - 8.0, r - 8.0) <= kDefaultDotRadius;
            CHECK((enc.target(r, c) == Label::Foreground) == in_disk);
            fg += in_disk;
        }
    }
    CHECK(fg == 13);
}

TEST_CASE("local clustering: weakly stained cell is still foreground") {
    const Dims dims{32, 32};
    // 10/255 contrast per channel.
    const ImageRGB img = disk_image(dims, 16, 16, 5.0, {220, 220, 220}, {230, 230, 230});
    const PointSet pts{{16, 16}};
    const ClusterEncoding enc = local_cluster_encode(img, pts, voronoi_partition(pts, dims));
    int hit = 0, total = 0;
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
            if (std::hypot(c - 16.0, r - 16.0) <= 5.0) {
                ++total;
                hit += enc.target(r, c) == Label::Foreground;
            }
        }
    }
    CHECK(hit >= 0.9 * total);
}

TEST_CASE("local clustering: every annotation pixel is foreground in its own target") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Dims dims{40, 40};
        ImageRGB img(dims);
        for (Rgb& p : img) p = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
        const PointSet pts = random_points(rng, dims, 10);
        const ClusterEncoding enc = local_cluster_encode(img, pts, voronoi_partition(pts, dims));
        for (const Point& p : pts) {
            const PixelPos px = pixel_of(p, dims);
            CHECK(enc.target(px.row, px.col) == Label::Foreground);
        }
        CHECK(local_cluster_encode(img, pts, voronoi_partition(pts, dims)).target == enc.target);
    }
}

TEST_CASE("global baseline: strong cells covered, weak cell missed, uniform image rejected") {
    const Dims dims{48, 48};
    ImageRGB img(dims, Rgb{235, 228, 220});
    for (int r = 0; r < 48; ++r) {
        for (int c = 0; c < 48; ++c) {
            if (std::hypot(c - 12.0, r - 12.0) <= 5.0) img(r, c) = {110, 70, 40};
            if (std::hypot(c - 34.0, r - 34.0) <= 5.0) img(r, c) = {110, 70, 40};
            if (std::hypot(c - 12.0, r - 34.0) <= 5.0) img(r, c) = {222, 212, 200};
        }
    }
    const PointSet pts{{12, 12}, {34, 34}, {12, 34}};
    const TriStateLabelMap global = global_cluster_baseline(img, pts, 3);
    int strong_missing = 0, weak_fg = 0;
    for (int r = 0; r < 48; ++r) {
        for (int c = 0; c < 48; ++c) {
            if (std::hypot(c - 12.0, r - 12.0) <= 5.0 || std::hypot(c - 34.0, r - 34.0) <= 5.0) {
                strong_missing += global(r, c) != Label::Foreground;
            }
            if (std::hypot(c - 12.0, r - 34.0) <= 5.0) weak_fg += global(r, c) == Label::Foreground;
        }
    }
    CHECK(strong_missing == 0);
    CHECK(weak_fg == 0);
    CHECK_THROWS_WITH_AS(global_cluster_baseline(ImageRGB(dims, Rgb{9, 9, 9}), pts, 3), "degenerate global clustering", Error);
}

TEST_CASE("repel: peak, support and closed form") {
    const RepelParams params;
    CHECK(repel_value(0.0, INFINITY, params) == 1.0);
    CHECK(repel_value(70.0, INFINITY, params) == 0.0);
    CHECK(repel_value(90.0, 100.0, params) == 0.0);
    CHECK(repel_value(0.0, 20.0, params) == doctest::Approx(20.0 / (20.0 + 3.5)).epsilon(1e-15));
    const RepelMap single = repel_encode({{5, 5}}, {16, 16}, params);
    CHECK(single(5, 5) == 1.0);
    CHECK_THROWS_AS(repel_encode({{5, 5}}, {16, 16}, RepelParams{0.0, 70.0}), Error);
}

TEST_CASE("repel: range, radial monotonicity and neighbour compression") {
    const RepelParams params{0.05, 20.0};
    std::mt19937_64 rng(2);
    const Dims dims{48, 48};
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_real_distribution<double> u(0, 47);
        PointSet pts{{u(rng), u(rng)}};
        if (trial % 2) pts.push_back({u(rng), u(rng)});
        if (pts.size() == 2 && pixel_of(pts[0], dims) == pixel_of(pts[1], dims)) pts.pop_back();
        const RepelMap m = repel_encode(pts, dims, params);
        for (int r = 0; r < 48; ++r) {
            for (int c = 0; c < 48; ++c) {
                CHECK(m(r, c) >= 0.0);
                CHECK(m(r, c) <= 1.0);
                double d1 = 1e9;
                for (const Point& p : pts) d1 = std::min(d1, std::hypot(c - p.x, r - p.y));
                if (d1 >= params.radius) CHECK(m(r, c) == 0.0);
            }
        }
    }
    for (double d1 = 0.0; d1 < 20.0; d1 += 0.5) {
        double prev_d = repel_value(d1, INFINITY, params) + 1.0;
        (void)prev_d;
        double prev = -1.0;
        for (double D = d1; D < 200.0; D += 0.25) {
            const double v = repel_value(d1, D, params);
            CHECK(v >= prev);
            prev = v;
        }
    }
    double prev = 2.0;
    for (double d = 0.0; d < 25.0; d += 0.1) {
        const double v = repel_value(d, INFINITY, params);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("filtered repel masks background and is pointwise bounded") {
    RepelMap repel({3, 3}, 0.7);
    TriStateLabelMap cluster({3, 3}, Label::Background);
    cluster(1, 1) = Label::Foreground;
    const RepelMap f = filtered_repel(repel, cluster);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) CHECK(f(r, c) == (r == 1 && c == 1 ? 0.7 : 0.0));
    }
    CHECK(filtered_repel(repel, TriStateLabelMap({3, 3}, Label::Foreground)) == repel);

    std::mt19937_64 rng(4);
    const Dims dims{32, 32};
    ImageRGB img(dims);
    for (Rgb& p : img) p = {static_cast<std::uint8_t>(rng()), 100, 100};
    const PointSet pts{{5, 5}, {20, 9}, {12, 25}};
    const RepelMap full = repel_encode(pts, dims);
    const TriStateLabelMap cl = local_cluster_encode(img, pts, voronoi_partition(pts, dims)).target;
    const RepelMap masked = filtered_repel(full, cl);
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(masked[i] <= full[i]);
        if (cl[i] == Label::Foreground) CHECK(masked[i] == full[i]);
    }
}
