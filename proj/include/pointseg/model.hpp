#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pointseg/grid.hpp"
#include "pointseg/loss.hpp"

namespace pointseg {

struct ConvShape {
    int in = 0;
    int out = 0;

    std::size_t weight_count() const { return static_cast<std::size_t>(in) * out * 9; }
};

// conv3x3(3->8) + ReLU, conv3x3(8->16) + ReLU, conv3x3(16->2), softmax over the two channels.
inline constexpr std::array<ConvShape, 3> kArchitecture{{{3, 8}, {8, 16}, {16, 2}}};
inline constexpr int kMinInputSide = 7;

std::size_t parameter_count();

// Flat parameter vector; each layer stores [out][in][3][3] weights followed by [out] biases.
template <typename T>
struct Params {
    std::vector<T> values;

    Params() : values(parameter_count(), T{0}) {}

    std::span<T> weights(std::size_t layer);
    std::span<const T> weights(std::size_t layer) const;
    std::span<T> biases(std::size_t layer);
    std::span<const T> biases(std::size_t layer) const;

    friend bool operator==(const Params&, const Params&) = default;
};

using ModelParams = Params<float>;
using ModelParamsF64 = Params<double>;

ModelParams init_params(std::uint64_t seed);
ModelParamsF64 widen(const ModelParams& params);

// Pixel targets for one image, one per loss kind.
struct TrainingTargets {
    TriStateLabelMap voronoi;
    TriStateLabelMap cluster;
    RepelMap repel;
};

ProbabilityMap forward(const ModelParams& params, const NormalizedImage& image);
ProbabilityMap forward(const ModelParamsF64& params, const NormalizedImage& image);

double evaluate_loss(const ProbabilityMap& output, const TrainingTargets& targets, LossKind kind);

template <typename T>
struct LossGradient {
    double loss = 0.0;
    std::array<double, 3> per_kind{};  // indexed by LossKind, filled for the kinds evaluated
    Params<T> grad;
};

// Analytic gradient of the sum of the selected losses with respect to every parameter.
LossGradient<float> loss_gradient(const ModelParams& params, const NormalizedImage& image,
                                  const TrainingTargets& targets, std::span<const LossKind> kinds);
LossGradient<double> loss_gradient(const ModelParamsF64& params, const NormalizedImage& image,
                                   const TrainingTargets& targets, std::span<const LossKind> kinds);

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t sampled = 0;
    std::size_t kink_probes = 0;  // probes where one side flipped a ReLU unit
};

// Central differences in double precision on a seeded sample of at least `samples` parameters.
// When exactly one of the +h/-h probes changes which hidden units are active, the one-sided
// second-order difference on the unchanged side is used instead, since the loss is not smooth there.
GradientCheck finite_diff_check(const ModelParamsF64& params, const NormalizedImage& image,
                                const TrainingTargets& targets, LossKind kind, double h = 1e-5,
                                std::size_t samples = 200, std::uint64_t seed = 0);

enum class TrainMode : std::uint8_t { Scheduler, NaiveSum };

struct TrainConfig {
    double learning_rate = 0.001;
    double momentum = 0.9;
    int batch_size = 8;
    int epochs = 30;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

struct TrainingExample {
    NormalizedImage image;
    TrainingTargets targets;
};

struct IterationRecord {
    std::uint64_t iteration = 0;
    int epoch = 0;
    std::string kind;  // VORONOI, REPEL, CLUSTER or SUM
    double value = 0.0;
    std::array<double, 3> per_kind{};  // batch means, NaN where not evaluated
};

struct EpochSummary {
    int epoch = 0;
    std::array<double, 3> mean_loss{};  // per LossKind, NaN if the kind never ran
    std::array<int, 3> iterations{};
};

struct TrainingLog {
    std::vector<IterationRecord> iterations;
    std::vector<EpochSummary> epochs;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::uint64_t iteration, const std::string& what)
        : Error(what), iteration_(iteration) {}
    std::uint64_t iteration() const { return iteration_; }

private:
    std::uint64_t iteration_;
};

struct TrainResult {
    ModelParams params;
    TrainingLog log;
};

using ProgressFn = std::function<void(const EpochSummary&)>;

TrainResult train(const TrainConfig& config, const std::vector<TrainingExample>& dataset, TrainMode mode,
                  const ProgressFn& progress = {});

// Same as above, continuing from given parameters (used by tests to probe the update rule).
TrainResult train(const TrainConfig& config, const std::vector<TrainingExample>& dataset, TrainMode mode,
                  ModelParams initial, const ProgressFn& progress = {});

}  // namespace pointseg
