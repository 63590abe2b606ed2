#pragma once

#include <vector>

#include "pointseg/data.hpp"
#include "pointseg/encode.hpp"
#include "pointseg/metrics.hpp"
#include "pointseg/model.hpp"
#include "pointseg/post.hpp"

namespace pointseg {

struct EncodeConfig {
    double dot_radius = kDefaultDotRadius;
    double distance_weight = kDefaultDistanceWeight;
    RepelParams repel;
    bool filter_repel = true;  // train the repel task on the cluster-masked map
};

struct EncodedTargets {
    VoronoiEncoding voronoi;
    ClusterEncoding cluster;
    RepelMap repel;
    RepelMap filtered;
};

EncodedTargets encode_sample(const Sample& sample, const EncodeConfig& config);
TrainingTargets training_targets(const EncodedTargets& encoded, const EncodeConfig& config);

struct PostConfig {
    int min_distance = kDefaultMinDistance;
    double threshold = kDefaultDetectionThreshold;
};

struct Prediction {
    ProbabilityMap prob;
    BinaryMask mask;
    InstanceMask instances;
    DetectionSet detections;
};

Prediction predict(const ModelParams& params, const NormalizedImage& image, const PostConfig& config);

struct ImageEval {
    PixelScores pixel;
    Score aji;
    Score dice;
    DetReport detection;
    int predicted_count = 0;
    int true_count = 0;
};

struct EvalSummary {
    SegReport seg;  // means over images
    DetReport det;  // pooled tp/fp/fn, CCC over per-image counts
    std::vector<ImageEval> images;
    bool ccc_degenerate = false;
};

ImageEval evaluate_image(const Prediction& prediction, const Sample& truth, double match_radius);
EvalSummary summarize(std::vector<ImageEval> images);

// ImageRGB with instance boundaries and detections drawn over it.
ImageRGB overlay(const ImageRGB& image, const InstanceMask& instances, const DetectionSet& detections);

}  // namespace pointseg
