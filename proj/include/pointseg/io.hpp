#pragma once

#include <cstdint>
#include <string>

#include "pointseg/data.hpp"
#include "pointseg/encode.hpp"
#include "pointseg/model.hpp"
#include "pointseg/post.hpp"

namespace pointseg {

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

ImageRGB read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const ImageRGB& image);
Grid<std::uint8_t> read_png_gray8(const std::string& path);
void write_png_gray8(const std::string& path, const Grid<std::uint8_t>& image);
Grid<std::uint16_t> read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Grid<std::uint16_t>& image);

// 8-bit PNG, 0 = background, 1 = foreground, 255 = ignored.
void write_label_map(const std::string& path, const TriStateLabelMap& labels);
TriStateLabelMap read_label_map(const std::string& path);

constexpr double kRepelScale = 65535.0;

// 16-bit PNG of round(value * 65535) plus `<path>.json` with alpha, r and scale.
void write_repel_map(const std::string& path, const RepelMap& map, const RepelParams& params);
RepelMap read_repel_map(const std::string& path);

// 16-bit PNG, gray value = instance id.
void write_instances(const std::string& path, const InstanceMask& instances);
InstanceMask read_instances(const std::string& path);

std::string points_to_csv(const PointSet& points);
std::string detections_to_csv(const DetectionSet& detections);

std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

std::string stats_to_json(const NormStats& stats);
NormStats stats_from_json(const std::string& text);

}  // namespace pointseg
