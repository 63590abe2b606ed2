#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pointseg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dims {
    int height = 0;
    int width = 0;

    std::size_t area() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    bool contains(int row, int col) const { return row >= 0 && row < height && col >= 0 && col < width; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

// Row-major 2-D raster.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(Dims dims, T fill = T{}) : dims_(dims), data_(dims.area(), fill) {
        if (dims.height < 0 || dims.width < 0) throw Error("negative grid dimensions");
    }
    Grid(int height, int width, T fill = T{}) : Grid(Dims{height, width}, fill) {}

    Dims dims() const { return dims_; }
    int height() const { return dims_.height; }
    int width() const { return dims_.width; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int row, int col) { return data_[index(row, col)]; }
    const T& operator()(int row, int col) const { return data_[index(row, col)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(col);
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }
    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Dims dims_{};
    std::vector<T> data_;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

using ImageRGB = Grid<Rgb>;

// Channel-major float image (C x H x W), the model input after normalization.
struct PlanarImage {
    int channels = 0;
    Dims dims{};
    std::vector<float> data;

    PlanarImage() = default;
    PlanarImage(int c, Dims d) : channels(c), dims(d), data(static_cast<std::size_t>(c) * d.area(), 0.0f) {}

    float& at(int c, int row, int col) { return data[(static_cast<std::size_t>(c) * dims.height + row) * dims.width + col]; }
    float at(int c, int row, int col) const { return data[(static_cast<std::size_t>(c) * dims.height + row) * dims.width + col]; }
};

using NormalizedImage = PlanarImage;

// A cell-center annotation. x is the pixel column, y the pixel row.
struct Point {
    double x = 0.0;
    double y = 0.0;
    int cls = -1;  // optional class tag, -1 when absent

    friend bool operator==(const Point&, const Point&) = default;
};

using PointSet = std::vector<Point>;

// Pixel holding a coordinate: nearest integer, clamped into [0, extent).
inline int pixel_index(double v, int extent) {
    const long r = std::lround(v);
    return static_cast<int>(std::clamp<long>(r, 0, extent - 1));
}

struct PixelPos {
    int row = 0;
    int col = 0;
    friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

inline PixelPos pixel_of(const Point& p, Dims dims) { return {pixel_index(p.y, dims.height), pixel_index(p.x, dims.width)}; }

// Throws if a point lies outside [0, W) x [0, H) or two points share a rounded pixel.
void validate_points(const PointSet& points, Dims dims);

enum class Label : std::uint8_t { Background = 0, Foreground = 1, Ignored = 255 };

using TriStateLabelMap = Grid<Label>;
using RepelMap = Grid<double>;
using BinaryMask = Grid<std::uint8_t>;
using InstanceMask = Grid<int>;

}  // namespace pointseg
