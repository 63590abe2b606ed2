#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointseg/grid.hpp"

namespace pointseg {

struct SynthSpec {
    Dims dims{128, 128};
    int images = 1;
    int min_cells = 8;
    int max_cells = 24;
    double min_radius = 3.5;  // mean semi-axis, pixels
    double max_radius = 6.0;
    double min_eccentricity = 0.0;
    double max_eccentricity = 0.7;
    Rgb strong_positive{120, 75, 45};
    Rgb weak_positive{200, 170, 140};
    Rgb negative{80, 95, 165};
    Rgb background{235, 228, 220};
    // Probability of each stain class: strong-positive, weak-positive, negative.
    std::array<double, 3> class_weights{0.4, 0.2, 0.4};
    double contrast_jitter = 0.15;  // relative scale jitter of cell-vs-background contrast
    double min_contrast = 40.0;     // per-channel sum distance required for non-weak classes
    double cluster_tightness = 0.0;
    double noise_sigma = 4.0;
    int max_retries = 400;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Sample {
    std::string id;
    ImageRGB image;
    std::optional<InstanceMask> instances;  // absent for points-only data
    PointSet points;  // with instances present, points[i] belongs to instance i + 1
    std::string regime;
};

std::vector<Sample> generate_synthetic(const SynthSpec& spec);

struct Regime {
    std::string name;
    SynthSpec spec;
};

// Sparse/clustered x strong/weak variants of a base spec.
std::vector<Regime> synth_regimes(const SynthSpec& base);

// `total` images cycling through the regimes, each with its own derived seed.
std::vector<Sample> generate_regime_dataset(const SynthSpec& base, int total);

enum class Split : std::uint8_t { Train, Validation, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

// 80/10/10 per regime, seeded shuffle inside each regime.
std::vector<Split> assign_splits(const std::vector<Sample>& samples, std::uint64_t seed);

PointSet parse_points_csv(const std::string& text, Dims dims, const std::string& source = "points");

std::vector<Sample> load_dataset(const std::vector<std::string>& image_paths,
                                 const std::vector<std::string>& point_paths);

// Full tiles only; partial edge tiles are dropped.
std::vector<Sample> extract_patches(const Sample& sample, int size, int stride);

struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

struct AugmentOp {
    enum class Kind : std::uint8_t { HFlip, VFlip, Rotate90, Resize, Affine, Crop };
    Kind kind = Kind::HFlip;
    int quarter_turns = 1;                     // Rotate90
    double scale = 1.0;                        // Resize
    std::array<double, 6> matrix{1, 0, 0, 0, 1, 0};  // Affine: x' = m0 x + m1 y + m2, y' = m3 x + m4 y + m5
    Rect rect;                                 // Crop

    static AugmentOp of(Kind k) {
        AugmentOp op;
        op.kind = k;
        return op;
    }
    static AugmentOp hflip() { return of(Kind::HFlip); }
    static AugmentOp vflip() { return of(Kind::VFlip); }
    static AugmentOp rotate90(int k) {
        AugmentOp op = of(Kind::Rotate90);
        op.quarter_turns = k;
        return op;
    }
    static AugmentOp resize(double s) {
        AugmentOp op = of(Kind::Resize);
        op.scale = s;
        return op;
    }
    static AugmentOp affine(const std::array<double, 6>& m) {
        AugmentOp op = of(Kind::Affine);
        op.matrix = m;
        return op;
    }
    static AugmentOp crop(Rect r) {
        AugmentOp op = of(Kind::Crop);
        op.rect = r;
        return op;
    }
};

struct AugmentRanges {
    double min_scale = 0.8;
    double max_scale = 1.2;
    double max_rotation_deg = 15.0;
    double max_shear_deg = 5.0;
};

struct Augmented {
    Sample sample;
    int dropped_points = 0;
};

// Applies the ops in order. Points map exactly, instance masks by nearest neighbour,
// the image bilinearly for resize/affine. Points mapped outside are dropped together
// with their instances.
Augmented augment_sample(const Sample& sample, const std::vector<AugmentOp>& ops);

// Random flip/rotate/resize/affine ops followed by a crop back to `patch` pixels.
std::vector<AugmentOp> random_augmentation(Dims dims, int patch, const AugmentRanges& ranges, std::uint64_t seed);

struct NormStats {
    std::array<double, 3> mean{};
    std::array<double, 3> std{};
};

struct Normalized {
    std::vector<NormalizedImage> images;
    NormStats stats;
};

// Without stats: compute per-channel mean/std over every pixel and apply them.
// With stats: apply the given ones unchanged.
Normalized normalize(const std::vector<Sample>& samples, const std::optional<NormStats>& stats = std::nullopt);
NormalizedImage apply_normalization(const ImageRGB& image, const NormStats& stats);

}  // namespace pointseg
