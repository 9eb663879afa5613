#pragma once

#include <cstdint>
#include <vector>

namespace lsnet {

/// Axis-aligned pixel box in corner form.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  BBox shifted(double dx, double dy) const { return {x_min + dx, y_min + dy, x_max + dx, y_max + dy}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox bbox;
  int category = 0;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthBox {
  BBox bbox;
  int category = 0;
  int track_id = 0;
  std::int64_t frame_index = 0;

  double area() const { return bbox.area(); }

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Raw 8-bit image, planes stored one after another (plane, row, column).
struct Image {
  int width = 0;
  int height = 0;
  int planes = 0;
  std::vector<std::uint8_t> data;

  bool empty() const { return data.empty(); }
  std::uint8_t at(int p, int y, int x) const {
    return data[(static_cast<std::size_t>(p) * height + y) * width + x];
  }
  std::uint8_t& at(int p, int y, int x) {
    return data[(static_cast<std::size_t>(p) * height + y) * width + x];
  }
};

/// One video frame. Synthetic frames may omit pixels, in which case the frame
/// is only a timing descriptor.
struct Frame {
  std::int64_t index = 0;
  double timestamp_ms = 0.0;
  Image pixels;
};

}  // namespace lsnet
