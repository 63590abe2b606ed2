#pragma once

#include <vector>

#include "pointseg/grid.hpp"
#include "pointseg/loss.hpp"

namespace pointseg {

struct Detection {
    int x = 0;
    int y = 0;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

using DetectionSet = std::vector<Detection>;

// 5 px is the published 2.5 um minimum peak distance at 0.5 um/pixel.
constexpr int kDefaultMinDistance = 5;
// Not part of the published method: suppresses maxima on flat background.
constexpr double kDefaultDetectionThreshold = 0.5;

// 1 where nuclei > background (strict), else 0.
BinaryMask argmax_mask(const ProbabilityMap& prob);

// 4-connected components, ids 1..K in raster-scan first-encounter order.
InstanceMask extract_instances(const BinaryMask& mask);
int instance_count(const InstanceMask& instances);

DetectionSet detect_cells(const ProbabilityMap& prob, int min_distance = kDefaultMinDistance,
                          double threshold = kDefaultDetectionThreshold);

}  // namespace pointseg
