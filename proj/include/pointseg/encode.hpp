#pragma once

#include <cstdint>
#include <vector>

#include "pointseg/grid.hpp"

namespace pointseg {

struct VoronoiPartition {
    Grid<int> region_id;         // index of the nearest annotation point
    Grid<std::uint8_t> line_mask;  // 1 where a 4-neighbour belongs to another region
};

struct VoronoiEncoding {
    VoronoiPartition partition;
    TriStateLabelMap target;
};

struct RepelParams {
    double alpha = 0.05;
    double radius = 70.0;  // pixels

    void validate() const;
};

// One entry per sub-region that fell back to a point disk instead of k-means.
struct ClusterDiagnostic {
    int region = -1;
    const char* reason = "";
};

struct ClusterEncoding {
    TriStateLabelMap target;
    std::vector<ClusterDiagnostic> fallbacks;
};

constexpr double kDefaultDotRadius = 2.0;
constexpr double kDefaultDistanceWeight = 0.3;

struct LocalClusterOptions {
    double distance_weight = kDefaultDistanceWeight;
    double dot_radius = kDefaultDotRadius;  // used by the degenerate-region fallback
    int max_iterations = 100;
};


// Foreground disks of dot_radius around each point, partition lines as
// background, everything else ignored. Disk pixels win over line pixels.
VoronoiEncoding voronoi_encode(const PointSet& points, Dims dims, double dot_radius = kDefaultDotRadius);

// Nearest-point assignment only (ties to the lowest index) plus its 4-neighbour boundary.
VoronoiPartition voronoi_partition(const PointSet& points, Dims dims);

// k=2 k-means inside each Voronoi sub-region over [R, G, B, weight * normalized distance].
// The cluster holding the annotation pixel becomes foreground.
ClusterEncoding local_cluster_encode(const ImageRGB& image, const PointSet& points, const VoronoiPartition& partition,
                                     const LocalClusterOptions& options = {});

// Whole-image 2-means on RGB; the darker cluster is foreground. Comparison baseline only.
TriStateLabelMap global_cluster_baseline(const ImageRGB& image, const PointSet& points, std::uint64_t seed);

double repel_value(double d1, double d2, const RepelParams& params);
RepelMap repel_encode(const PointSet& points, Dims dims, const RepelParams& params = {});

RepelMap filtered_repel(const RepelMap& repel, const TriStateLabelMap& cluster);

}  // namespace pointseg
