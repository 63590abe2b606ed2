#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pointseg/metrics.hpp"

using namespace pointseg;

namespace {

InstanceMask rect(Dims d, std::initializer_list<std::array<int, 5>> boxes) {
    InstanceMask m(d, 0);
    for (const auto& [id, r0, c0, h, w] : boxes) {
        for (int r = r0; r < r0 + h; ++r) for (int c = c0; c < c0 + w; ++c) m(r, c) = id;
    }
    return m;
}

InstanceMask permute_ids(const InstanceMask& m, std::mt19937_64& rng) {
    std::vector<int> map(10);
    std::iota(map.begin(), map.end(), 0);
    std::shuffle(map.begin() + 1, map.end(), rng);
    InstanceMask out = m;
    for (int& v : out) v = map[static_cast<std::size_t>(v)];
    return out;
}

}  // namespace

TEST_CASE("pixel metrics") {
    BinaryMask a(Dims{2, 2}), b(Dims{2, 2});
    a[0] = a[1] = 1;
    b[0] = b[2] = 1;
    const PixelScores s = pixel_metrics(a, b);
    CHECK(s.acc == 0.5);
    CHECK(s.f1.value == 0.5);
    CHECK(pixel_metrics(a, a).acc == 1.0);
    CHECK(pixel_metrics(a, a).f1.value == 1.0);
    BinaryMask inv = a;
    for (auto& v : inv) v = !v;
    CHECK(pixel_metrics(inv, a).acc == 0.0);
    CHECK(pixel_metrics(inv, a).f1.value == 0.0);
    const PixelScores empty = pixel_metrics(BinaryMask({3, 3}, 0), BinaryMask({3, 3}, 0));
    CHECK(empty.f1.value == 1.0);
    CHECK(empty.f1.degenerate);
    CHECK_THROWS_AS(pixel_metrics(a, BinaryMask(Dims{3, 2})), Error);
}

TEST_CASE("aji reference layouts") {
    const Dims d{6, 6};
    const InstanceMask truth = rect(d, {{1, 0, 0, 2, 2}, {2, 2, 0, 2, 2}});
    const InstanceMask merged = rect(d, {{1, 0, 0, 4, 2}});
    CHECK(aji(merged, truth).value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(aji(truth, truth).value == 1.0);
    InstanceMask spurious = truth;
    spurious(5, 5) = 7;
    CHECK(aji(spurious, truth).value == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
    CHECK(aji(InstanceMask(d, 0), InstanceMask(d, 0)).degenerate);
    CHECK(aji(truth, InstanceMask(d, 0)).value == 0.0);
}

TEST_CASE("object dice reference layouts") {
    const Dims d{6, 6};
    const InstanceMask square = rect(d, {{1, 0, 0, 4, 4}});
    const InstanceMask half = rect(d, {{3, 0, 0, 4, 2}});
    CHECK(object_dice(half, square).value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(object_dice(square, square).value == 1.0);
    CHECK(object_dice(rect(d, {{1, 4, 4, 2, 2}}), square).value == 0.0);
}

TEST_CASE("instance metrics agree with pixel-set oracles on random layouts") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const InstanceMask t = oracle::random_layout(rng, {12, 12}, 3);
        const InstanceMask p = oracle::random_layout(rng, {12, 12}, 3);
        CHECK(aji(p, t).value == doctest::Approx(oracle::aji(p, t)).epsilon(1e-12));
        CHECK(object_dice(p, t).value == doctest::Approx(oracle::object_dice(p, t)).epsilon(1e-12));
        CHECK(aji(p, t).value >= 0.0);
        CHECK(aji(p, t).value <= 1.0);
        CHECK(object_dice(p, t).value >= 0.0);
        CHECK(object_dice(p, t).value <= 1.0);
        const InstanceMask p2 = permute_ids(p, rng), t2 = permute_ids(t, rng);
        CHECK(aji(p2, t2).value == aji(p, t).value);
        CHECK(object_dice(p2, t2).value == object_dice(p, t).value);
        CHECK(aji(t, t).value == 1.0);
        CHECK(object_dice(t, t).value == 1.0);
    }
}

TEST_CASE("eroding a predicted object inside its truth never raises aji or object dice") {
    std::mt19937_64 rng(31);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const InstanceMask t = oracle::random_layout(rng, Dims{12, 12}, 1);
        // Prediction: the truth object with some pixels missing, relabelled.
        InstanceMask p(t.dims(), 0);
        for (std::size_t i = 0; i < t.size(); ++i) p[i] = t[i] > 0 && rng() % 4 ? 5 : 0;
        std::vector<std::size_t> edge;
        for (int r = 0; r < 12; ++r) {
            for (int c = 0; c < 12; ++c) {
                if (p(r, c) == 0) continue;
                const bool b = r == 0 || c == 0 || r == 11 || c == 11 || p(r - 1, c) == 0 || p(r + 1, c) == 0 ||
                               p(r, c - 1) == 0 || p(r, c + 1) == 0;
                if (b) edge.push_back(p.index(r, c));
            }
        }
        if (edge.size() < 2) continue;
        InstanceMask eroded = p;
        eroded[edge[rng() % edge.size()]] = 0;
        CHECK(aji(eroded, t).value <= aji(p, t).value);
        CHECK(object_dice(eroded, t).value <= object_dice(p, t).value);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("detection matching") {
    const PointSet truth{{10, 10}, {14, 10}};
    const DetReport r = detection_metrics({{12, 10, 1.0}}, truth, 5.0);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.fn == 1);
    const DetReport none = detection_metrics({}, {{1, 1}, {5, 5}, {9, 9}, {13, 13}, {17, 17}}, 5.0);
    CHECK(none.tp == 0);
    CHECK(none.fn == 5);
    CHECK(none.recall == 0.0);
    const DetReport same = detection_metrics({{10, 10, 1}, {14, 10, 1}}, truth, 5.0);
    CHECK(same.precision == 1.0);
    CHECK(same.recall == 1.0);
    // Greedy nearest-first would pair (5,0) with (4,0) and lose (8,0).
    const DetReport chain = detection_metrics({{5, 0, 1}, {1, 0, 1}}, {{4, 0}, {8, 0}}, 3.5);
    CHECK(chain.tp == 2);
}

TEST_CASE("detection matching agrees with exhaustive assignment") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> coord(0, 15);
    for (int trial = 0; trial < 300; ++trial) {
        DetectionSet pred;
        PointSet truth;
        const int np = static_cast<int>(rng() % 7), nt = static_cast<int>(rng() % 7);
        for (int i = 0; i < np; ++i) pred.push_back({coord(rng), coord(rng), 1.0});
        for (int i = 0; i < nt; ++i) truth.push_back({static_cast<double>(coord(rng)), static_cast<double>(coord(rng))});
        const DetReport r = detection_metrics(pred, truth, 5.0);
        CHECK(r.tp == oracle::best_matching(pred, truth, 5.0).tp);
        CHECK(r.tp + r.fn == nt);
        CHECK(r.tp + r.fp == np);
    }
}

TEST_CASE("min cost assignment matches permutations") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 5);
        std::vector<double> cost(static_cast<std::size_t>(n * n));
        for (double& c : cost) c = u(rng);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e18;
        do {
            double s = 0;
            for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])];
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const std::vector<int> a = min_cost_assignment(cost, n, n);
        double got = 0;
        for (int i = 0; i < n; ++i) got += cost[static_cast<std::size_t>(i * n + a[static_cast<std::size_t>(i)])];
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("ccc") {
    const std::vector<double> x{1, 2, 3}, rev{3, 2, 1};
    CHECK(ccc(x, x).value == 1.0);
    CHECK(ccc(x, rev).value == doctest::Approx(-1.0).epsilon(1e-15));
    const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6};
    // 2 s^2 / (2 s^2 + c^2) with s^2 = 1.25, c = 2.
    CHECK(ccc(a, b).value == doctest::Approx(2.5 / 6.5).epsilon(1e-15));
    CHECK(ccc(a, b).value == ccc(b, a).value);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> n(0, 30);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(8), q(8);
        for (std::size_t i = 0; i < 8; ++i) {
            p[i] = n(rng);
            q[i] = n(rng);
        }
        const Score s = ccc(p, q);
        if (s.degenerate) continue;
        CHECK(s.value == doctest::Approx(oracle::ccc(p, q)).epsilon(1e-12));
        CHECK(s.value >= -1.0);
        CHECK(s.value <= 1.0);
    }
    const std::vector<double> c{2, 2, 2};
    CHECK(ccc(c, c).degenerate);
    CHECK(ccc(c, c).value == 1.0);
    CHECK_THROWS_AS(ccc(x, a), Error);
}
