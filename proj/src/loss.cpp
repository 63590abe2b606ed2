#include "pointseg/loss.hpp"

#include <cmath>
#include <string>

namespace pointseg {

namespace {

template <typename Target>
void check_dims(const Target& target, const ProbabilityMap& output, const char* what) {
    if (target.dims() != output.nuclei.dims()) throw Error(std::string(what) + ": dimension mismatch");
}

double bce(double t, double o) {
    const double p = clamp_probability(o);
    return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

double bce_grad(double t, double o) {
    if (o < kProbabilityEpsilon || o > 1.0 - kProbabilityEpsilon) return 0.0;
    return -t / o + (1.0 - t) / (1.0 - o);
}

}  // namespace

ProbabilityMap ProbabilityMap::from_nuclei(const Grid<double>& nuclei) {
    ProbabilityMap m;
    m.nuclei = nuclei;
    m.background = Grid<double>(nuclei.dims());
    for (std::size_t i = 0; i < nuclei.size(); ++i) m.background[i] = 1.0 - nuclei[i];
    return m;
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Voronoi: return "VORONOI";
        case LossKind::Repel: return "REPEL";
        case LossKind::Cluster: return "CLUSTER";
    }
    return "UNKNOWN";
}

LossKind loss_kind_from_string(std::string_view name) {
    if (name == "VORONOI") return LossKind::Voronoi;
    if (name == "REPEL") return LossKind::Repel;
    if (name == "CLUSTER") return LossKind::Cluster;
    throw Error("unknown loss kind: " + std::string(name));
}

double clamp_probability(double o) { return std::clamp(o, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

double cluster_loss(const TriStateLabelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "cluster_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == Label::Ignored) throw Error("cluster_loss: target contains ignored pixels");
        sum += bce(target[i] == Label::Foreground ? 1.0 : 0.0, output.nuclei[i]);
    }
    return sum / static_cast<double>(target.size());
}

double voronoi_loss(const TriStateLabelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "voronoi_loss");
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == Label::Ignored) continue;
        sum += bce(target[i] == Label::Foreground ? 1.0 : 0.0, output.nuclei[i]);
        ++used;
    }
    if (used == 0) throw Error("empty Voronoi supervision");
    return sum / static_cast<double>(used);
}

double repel_loss(const RepelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "repel_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - output.nuclei[i];
        sum += d * d;
    }
    return sum / static_cast<double>(target.size());
}

Grid<double> cluster_loss_grad(const TriStateLabelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "cluster_loss");
    Grid<double> g(target.dims(), 0.0);
    const double scale = 1.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == Label::Ignored) throw Error("cluster_loss: target contains ignored pixels");
        g[i] = scale * bce_grad(target[i] == Label::Foreground ? 1.0 : 0.0, output.nuclei[i]);
    }
    return g;
}

Grid<double> voronoi_loss_grad(const TriStateLabelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "voronoi_loss");
    Grid<double> g(target.dims(), 0.0);
    std::size_t used = 0;
    for (const Label l : target) used += l != Label::Ignored;
    if (used == 0) throw Error("empty Voronoi supervision");
    const double scale = 1.0 / static_cast<double>(used);
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == Label::Ignored) continue;
        g[i] = scale * bce_grad(target[i] == Label::Foreground ? 1.0 : 0.0, output.nuclei[i]);
    }
    return g;
}

Grid<double> repel_loss_grad(const RepelMap& target, const ProbabilityMap& output) {
    check_dims(target, output, "repel_loss");
    Grid<double> g(target.dims(), 0.0);
    const double scale = 2.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) g[i] = scale * (output.nuclei[i] - target[i]);
    return g;
}

}  // namespace pointseg
