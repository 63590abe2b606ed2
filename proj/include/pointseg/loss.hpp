#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "pointseg/grid.hpp"

namespace pointseg {

// Two-channel per-pixel softmax output. Nuclei is the channel compared to every target.
struct ProbabilityMap {
    Grid<double> nuclei;
    Grid<double> background;

    ProbabilityMap() = default;
    explicit ProbabilityMap(Dims dims) : nuclei(dims, 0.5), background(dims, 0.5) {}
    static ProbabilityMap from_nuclei(const Grid<double>& nuclei);

    Dims dims() const { return nuclei.dims(); }
};

enum class LossKind : std::uint8_t { Voronoi = 0, Repel = 1, Cluster = 2 };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

constexpr double kProbabilityEpsilon = 1e-7;

double clamp_probability(double o);

double cluster_loss(const TriStateLabelMap& target, const ProbabilityMap& output);
double voronoi_loss(const TriStateLabelMap& target, const ProbabilityMap& output);
double repel_loss(const RepelMap& target, const ProbabilityMap& output);

// dL/d(nuclei) for each loss, same shape as the target. The clamp has zero slope outside
// [eps, 1 - eps].
Grid<double> cluster_loss_grad(const TriStateLabelMap& target, const ProbabilityMap& output);
Grid<double> voronoi_loss_grad(const TriStateLabelMap& target, const ProbabilityMap& output);
Grid<double> repel_loss_grad(const RepelMap& target, const ProbabilityMap& output);

struct SchedulerState {
    std::uint64_t iteration = 0;

    void advance() { ++iteration; }
};

// Round-robin task selection by iteration index modulo 3.
constexpr LossKind select_loss(SchedulerState state) {
    switch (state.iteration % 3) {
        case 0: return LossKind::Voronoi;
        case 1: return LossKind::Repel;
        default: return LossKind::Cluster;
    }
}

// Adds smallest first so the result does not depend on argument order.
constexpr double naive_sum_loss(double voronoi, double repel, double cluster) {
    double a = voronoi, b = repel, c = cluster;
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    return (a + b) + c;
}

}  // namespace pointseg
