#include "pointseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pointseg/parallel.hpp"

namespace pointseg {

namespace {

struct LayerOffsets {
    std::size_t weights;
    std::size_t biases;
};

constexpr std::array<LayerOffsets, kArchitecture.size()> layer_offsets() {
    std::array<LayerOffsets, kArchitecture.size()> out{};
    std::size_t at = 0;
    for (std::size_t l = 0; l < kArchitecture.size(); ++l) {
        out[l].weights = at;
        at += static_cast<std::size_t>(kArchitecture[l].in) * kArchitecture[l].out * 9;
        out[l].biases = at;
        at += static_cast<std::size_t>(kArchitecture[l].out);
    }
    return out;
}

constexpr auto kOffsets = layer_offsets();

// C x H x W activation buffer.
template <typename T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, T{0}) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
    const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }
};

// out[o] = bias[o] + sum_i w[o][i] (*) in[i], zero padding, same size.
template <typename T>
void conv_forward(const Tensor<T>& in, std::span<const T> w, std::span<const T> b, Tensor<T>& out) {
    const int H = in.height, W = in.width;
    for (int o = 0; o < out.channels; ++o) {
        T* dst = out.channel(o);
        std::fill(dst, dst + out.plane(), b[static_cast<std::size_t>(o)]);
        for (int i = 0; i < in.channels; ++i) {
            const T* src = in.channel(i);
            const T* k = w.data() + (static_cast<std::size_t>(o) * in.channels + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                    const T wv = k[ky * 3 + kx];
                    for (int r = r0; r < r1; ++r) {
                        T* drow = dst + static_cast<std::size_t>(r) * W;
                        const T* srow = src + static_cast<std::size_t>(r + dy) * W + dx;
                        for (int c = c0; c < c1; ++c) drow[c] += wv * srow[c];
                    }
                }
            }
        }
    }
}

// Accumulates weight/bias gradients and, when d_in is non-null, the input gradient.
template <typename T>
void conv_backward(const Tensor<T>& in, std::span<const T> w, const Tensor<T>& d_out, std::span<T> dw,
                   std::span<T> db, Tensor<T>* d_in) {
    const int H = in.height, W = in.width;
    for (int o = 0; o < d_out.channels; ++o) {
        const T* g = d_out.channel(o);
        T bsum = 0;
        for (std::size_t p = 0; p < d_out.plane(); ++p) bsum += g[p];
        db[static_cast<std::size_t>(o)] += bsum;
        for (int i = 0; i < in.channels; ++i) {
            const T* src = in.channel(i);
            T* dsrc = d_in ? d_in->channel(i) : nullptr;
            const std::size_t kbase = (static_cast<std::size_t>(o) * in.channels + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                    const T wv = w[kbase + ky * 3 + kx];
                    T acc = 0;
                    for (int r = r0; r < r1; ++r) {
                        const T* grow = g + static_cast<std::size_t>(r) * W;
                        const T* srow = src + static_cast<std::size_t>(r + dy) * W + dx;
                        for (int c = c0; c < c1; ++c) acc += grow[c] * srow[c];
                        if (dsrc) {
                            T* drow = dsrc + static_cast<std::size_t>(r + dy) * W + dx;
                            for (int c = c0; c < c1; ++c) drow[c] += wv * grow[c];
                        }
                    }
                    dw[kbase + ky * 3 + kx] += acc;
                }
            }
        }
    }
}

template <typename T>
Tensor<T> to_tensor(const NormalizedImage& image) {
    if (image.channels != kArchitecture.front().in) throw Error("model expects a 3-channel image");
    if (image.dims.height < kMinInputSide || image.dims.width < kMinInputSide) {
        throw Error("model input must be at least 7x7");
    }
    Tensor<T> t(image.channels, image.dims.height, image.dims.width);
    std::transform(image.data.begin(), image.data.end(), t.data.begin(), [](float v) { return static_cast<T>(v); });
    return t;
}

template <typename T>
void check_finite(const Params<T>& params) {
    for (const T v : params.values) {
        if (!std::isfinite(static_cast<double>(v))) throw Error("model parameters contain non-finite values");
    }
}

template <typename T>
struct ForwardCache {
    std::array<Tensor<T>, kArchitecture.size() + 1> act;  // act[0] = input, act[l+1] = layer l output
    ProbabilityMap prob;
};

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

template <typename T>
ForwardCache<T> run_forward(const Params<T>& params, const NormalizedImage& image) {
    check_finite(params);
    ForwardCache<T> cache;
    cache.act[0] = to_tensor<T>(image);
    const int H = image.dims.height, W = image.dims.width;
    for (std::size_t l = 0; l < kArchitecture.size(); ++l) {
        Tensor<T> out(kArchitecture[l].out, H, W);
        conv_forward<T>(cache.act[l], params.weights(l), params.biases(l), out);
        if (l + 1 < kArchitecture.size()) {
            for (T& v : out.data) v = std::max(v, T{0});
        }
        cache.act[l + 1] = std::move(out);
    }
    const Tensor<T>& logits = cache.act.back();
    cache.prob = ProbabilityMap(image.dims);
    const T* z0 = logits.channel(0);
    const T* z1 = logits.channel(1);
    for (std::size_t p = 0; p < logits.plane(); ++p) {
        const double n = sigmoid(static_cast<double>(z0[p]) - static_cast<double>(z1[p]));
        cache.prob.nuclei[p] = n;
        cache.prob.background[p] = 1.0 - n;
    }
    return cache;
}

Grid<double> loss_output_grad(const ProbabilityMap& prob, const TrainingTargets& targets, LossKind kind) {
    switch (kind) {
        case LossKind::Voronoi: return voronoi_loss_grad(targets.voronoi, prob);
        case LossKind::Repel: return repel_loss_grad(targets.repel, prob);
        case LossKind::Cluster: return cluster_loss_grad(targets.cluster, prob);
    }
    throw Error("unknown loss kind");
}

template <typename T>
LossGradient<T> run_gradient(const Params<T>& params, const NormalizedImage& image, const TrainingTargets& targets,
                             std::span<const LossKind> kinds) {
    ForwardCache<T> cache = run_forward(params, image);
    LossGradient<T> result;
    result.per_kind.fill(std::numeric_limits<double>::quiet_NaN());

    Grid<double> d_nuclei(image.dims, 0.0);
    for (const LossKind kind : kinds) {
        const double value = evaluate_loss(cache.prob, targets, kind);
        result.per_kind[static_cast<std::size_t>(kind)] = value;
        result.loss += value;
        const Grid<double> g = loss_output_grad(cache.prob, targets, kind);
        for (std::size_t p = 0; p < g.size(); ++p) d_nuclei[p] += g[p];
    }

    // nuclei = sigmoid(z0 - z1)
    const int H = image.dims.height, W = image.dims.width;
    Tensor<T> d_act(kArchitecture.back().out, H, W);
    for (std::size_t p = 0; p < d_nuclei.size(); ++p) {
        const double n = cache.prob.nuclei[p];
        const double dz = d_nuclei[p] * n * (1.0 - n);
        d_act.channel(0)[p] = static_cast<T>(dz);
        d_act.channel(1)[p] = static_cast<T>(-dz);
    }

    for (std::size_t l = kArchitecture.size(); l-- > 0;) {
        const std::size_t wo = kOffsets[l].weights, bo = kOffsets[l].biases;
        std::span<T> dw(result.grad.values.data() + wo, kArchitecture[l].weight_count());
        std::span<T> db(result.grad.values.data() + bo, static_cast<std::size_t>(kArchitecture[l].out));
        if (l == 0) {
            conv_backward<T>(cache.act[0], params.weights(0), d_act, dw, db, nullptr);
            break;
        }
        Tensor<T> d_in(kArchitecture[l].in, H, W);
        conv_backward<T>(cache.act[l], params.weights(l), d_act, dw, db, &d_in);
        // act[l] is post-ReLU; a zero activation means the unit was inactive.
        const Tensor<T>& a = cache.act[l];
        for (std::size_t p = 0; p < d_in.data.size(); ++p) {
            if (!(a.data[p] > T{0})) d_in.data[p] = T{0};
        }
        d_act = std::move(d_in);
    }
    return result;
}

}  // namespace

std::size_t parameter_count() { return kOffsets.back().biases + static_cast<std::size_t>(kArchitecture.back().out); }

template <typename T>
std::span<T> Params<T>::weights(std::size_t layer) {
    return {values.data() + kOffsets.at(layer).weights, kArchitecture.at(layer).weight_count()};
}
template <typename T>
std::span<const T> Params<T>::weights(std::size_t layer) const {
    return {values.data() + kOffsets.at(layer).weights, kArchitecture.at(layer).weight_count()};
}
template <typename T>
std::span<T> Params<T>::biases(std::size_t layer) {
    return {values.data() + kOffsets.at(layer).biases, static_cast<std::size_t>(kArchitecture.at(layer).out)};
}
template <typename T>
std::span<const T> Params<T>::biases(std::size_t layer) const {
    return {values.data() + kOffsets.at(layer).biases, static_cast<std::size_t>(kArchitecture.at(layer).out)};
}

template struct Params<float>;
template struct Params<double>;

ModelParams init_params(std::uint64_t seed) {
    ModelParams p;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < kArchitecture.size(); ++l) {
        const double fan_in = kArchitecture[l].in * 9.0;
        const double fan_out = kArchitecture[l].out * 9.0;
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (float& w : p.weights(l)) w = static_cast<float>(dist(rng));
    }
    return p;
}

ModelParamsF64 widen(const ModelParams& params) {
    ModelParamsF64 out;
    std::transform(params.values.begin(), params.values.end(), out.values.begin(),
                   [](float v) { return static_cast<double>(v); });
    return out;
}

ProbabilityMap forward(const ModelParams& params, const NormalizedImage& image) {
    return run_forward(params, image).prob;
}

ProbabilityMap forward(const ModelParamsF64& params, const NormalizedImage& image) {
    return run_forward(params, image).prob;
}

double evaluate_loss(const ProbabilityMap& output, const TrainingTargets& targets, LossKind kind) {
    switch (kind) {
        case LossKind::Voronoi: return voronoi_loss(targets.voronoi, output);
        case LossKind::Repel: return repel_loss(targets.repel, output);
        case LossKind::Cluster: return cluster_loss(targets.cluster, output);
    }
    throw Error("unknown loss kind");
}

LossGradient<float> loss_gradient(const ModelParams& params, const NormalizedImage& image,
                                  const TrainingTargets& targets, std::span<const LossKind> kinds) {
    return run_gradient(params, image, targets, kinds);
}

LossGradient<double> loss_gradient(const ModelParamsF64& params, const NormalizedImage& image,
                                   const TrainingTargets& targets, std::span<const LossKind> kinds) {
    return run_gradient(params, image, targets, kinds);
}

// On/off state of every hidden ReLU unit.
std::vector<bool> relu_pattern(const ForwardCache<double>& cache) {
    std::vector<bool> out;
    for (std::size_t l = 1; l < kArchitecture.size(); ++l) {
        for (const double v : cache.act[l].data) out.push_back(v > 0.0);
    }
    return out;
}

GradientCheck finite_diff_check(const ModelParamsF64& params, const NormalizedImage& image,
                                const TrainingTargets& targets, LossKind kind, double h, std::size_t samples,
                                std::uint64_t seed) {
    const std::array<LossKind, 1> kinds{kind};
    const LossGradient<double> analytic = loss_gradient(params, image, targets, kinds);
    const ForwardCache<double> base_cache = run_forward(params, image);
    const std::vector<bool> base_pattern = relu_pattern(base_cache);
    const double base_loss = evaluate_loss(base_cache.prob, targets, kind);

    std::vector<std::size_t> order(params.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(order.size(), samples));

    GradientCheck check;
    check.sampled = order.size();
    ModelParamsF64 probe = params;
    for (const std::size_t idx : order) {
        const double base = params.values[idx];
        probe.values[idx] = base + h;
        const ForwardCache<double> up_cache = run_forward(probe, image);
        probe.values[idx] = base - h;
        const ForwardCache<double> down_cache = run_forward(probe, image);
        probe.values[idx] = base;
        const double up = evaluate_loss(up_cache.prob, targets, kind);
        const double down = evaluate_loss(down_cache.prob, targets, kind);
        const bool up_same = relu_pattern(up_cache) == base_pattern;
        const bool down_same = relu_pattern(down_cache) == base_pattern;
        // A central difference straddling a ReLU kink averages two slopes; use a second-order
        // one-sided stencil on the side without the kink.
        double numeric = (up - down) / (2.0 * h);
        if (up_same != down_same) {
            ++check.kink_probes;
            const double step = up_same ? h : -h;
            probe.values[idx] = base + 2.0 * step;
            const ForwardCache<double> far_cache = run_forward(probe, image);
            probe.values[idx] = base;
            const double near = up_same ? up : down;
            if (relu_pattern(far_cache) == base_pattern) {
                const double far = evaluate_loss(far_cache.prob, targets, kind);
                numeric = (4.0 * (near - base_loss) - (far - base_loss)) / (2.0 * step);
            } else {
                numeric = (near - base_loss) / step;
            }
        }
        const double a = analytic.grad.values[idx];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        if (rel > check.max_relative_error) {
            check.max_relative_error = rel;
            check.worst_index = idx;
        }
    }
    return check;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must be in [0, 1)");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (epochs < 0) throw Error("epochs must be >= 0");
}

TrainResult train(const TrainConfig& config, const std::vector<TrainingExample>& dataset, TrainMode mode,
                  const ProgressFn& progress) {
    return train(config, dataset, mode, init_params(config.seed), progress);
}

TrainResult train(const TrainConfig& config, const std::vector<TrainingExample>& dataset, TrainMode mode,
                  ModelParams initial, const ProgressFn& progress) {
    config.validate();
    if (dataset.empty()) throw Error("training dataset is empty");

    TrainResult result{std::move(initial), {}};
    ModelParams& params = result.params;
    std::vector<float> velocity(params.values.size(), 0.0f);
    const float lr = static_cast<float>(config.learning_rate);
    const float mu = static_cast<float>(config.momentum);

    // Shuffling uses its own stream so that parameter init and data order are independent.
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SchedulerState scheduler;
    const std::array<LossKind, 3> all_kinds{LossKind::Voronoi, LossKind::Repel, LossKind::Cluster};

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochSummary summary;
        summary.epoch = epoch;
        std::array<double, 3> sums{};

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
            const LossKind selected = select_loss(scheduler);
            std::span<const LossKind> kinds = mode == TrainMode::Scheduler
                                                  ? std::span<const LossKind>(&selected, 1)
                                                  : std::span<const LossKind>(all_kinds);

            std::vector<LossGradient<float>> per_image(count);
            parallel_for(count, config.threads, [&](std::size_t k) {
                per_image[k] = loss_gradient(params, dataset[order[start + k]].image, dataset[order[start + k]].targets,
                                             kinds);
            });

            // Fixed-order reduction keeps results independent of the thread count.
            std::vector<double> grad(params.values.size(), 0.0);
            IterationRecord rec;
            rec.iteration = scheduler.iteration;
            rec.epoch = epoch;
            rec.kind = mode == TrainMode::Scheduler ? std::string(to_string(selected)) : "SUM";
            rec.per_kind.fill(0.0);
            for (const auto& g : per_image) {
                rec.value += g.loss;
                for (std::size_t k = 0; k < 3; ++k) rec.per_kind[k] += g.per_kind[k];
                for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += g.grad.values[p];
            }
            const double inv = 1.0 / static_cast<double>(count);
            rec.value *= inv;
            for (double& v : rec.per_kind) v *= inv;
            if (mode == TrainMode::NaiveSum) rec.value = naive_sum_loss(rec.per_kind[0], rec.per_kind[1], rec.per_kind[2]);

            if (!std::isfinite(rec.value)) {
                std::ostringstream msg;
                msg << "training diverged at iteration " << scheduler.iteration << " (epoch " << epoch
                    << "): loss = " << rec.value;
                throw TrainingDiverged(scheduler.iteration, msg.str());
            }

            for (std::size_t p = 0; p < grad.size(); ++p) {
                velocity[p] = mu * velocity[p] - lr * static_cast<float>(grad[p] * inv);
                params.values[p] += velocity[p];
            }

            for (const LossKind k : kinds) {
                const auto idx = static_cast<std::size_t>(k);
                sums[idx] += rec.per_kind[idx];
                ++summary.iterations[idx];
            }
            result.log.iterations.push_back(std::move(rec));
            scheduler.advance();
        }

        for (std::size_t k = 0; k < 3; ++k) {
            summary.mean_loss[k] = summary.iterations[k] > 0 ? sums[k] / summary.iterations[k]
                                                              : std::numeric_limits<double>::quiet_NaN();
        }
        result.log.epochs.push_back(summary);
        if (progress) progress(summary);
    }
    return result;
}

}  // namespace pointseg
