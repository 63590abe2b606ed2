#pragma once

#include <span>
#include <vector>

#include "pointseg/grid.hpp"
#include "pointseg/post.hpp"

namespace pointseg {

// A score plus a flag set when the value comes from a degenerate-case convention
// (e.g. both inputs empty) rather than the formula itself.
struct Score {
    double value = 0.0;
    bool degenerate = false;
};

struct PixelScores {
    double acc = 0.0;
    Score f1;
};

struct SegReport {
    double acc = 0.0;
    double f1 = 0.0;
    double object_dice = 0.0;
    double aji = 0.0;
};

struct DetReport {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double ccc = 0.0;
};

PixelScores pixel_metrics(const BinaryMask& pred, const BinaryMask& truth);

Score aji(const InstanceMask& pred, const InstanceMask& truth);
Score object_dice(const InstanceMask& pred, const InstanceMask& truth);

// Maximum-cardinality one-to-one matching within `radius`, minimum total distance among those.
DetReport detection_metrics(const DetectionSet& pred, const PointSet& truth, double radius = 5.0);

// Lin's concordance correlation coefficient with population moments.
Score ccc(std::span<const double> x, std::span<const double> y);

BinaryMask foreground(const InstanceMask& instances);

// Minimum-cost assignment for a rows x cols cost matrix (row-major), rows <= cols.
// Returns the column assigned to each row.
std::vector<int> min_cost_assignment(const std::vector<double>& cost, int rows, int cols);

}  // namespace pointseg
