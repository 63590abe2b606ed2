#include "pointseg/grid.hpp"

#include <map>
#include <sstream>

namespace pointseg {

void validate_points(const PointSet& points, Dims dims) {
    std::ostringstream problems;
    std::map<std::pair<int, int>, std::size_t> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point& p = points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x >= dims.width ||
            p.y >= dims.height) {
            problems << "point " << i << " (" << p.x << ", " << p.y << ") outside " << dims.width << "x"
                     << dims.height << "; ";
            continue;
        }
        const PixelPos px = pixel_of(p, dims);
        auto [it, inserted] = seen.emplace(std::make_pair(px.row, px.col), i);
        if (!inserted) {
            problems << "points " << it->second << " and " << i << " share pixel (" << px.col << ", " << px.row
                     << "); ";
        }
    }
    const std::string msg = problems.str();
    if (!msg.empty()) throw Error("invalid annotations: " + msg.substr(0, msg.size() - 2));
}

}  // namespace pointseg
