#pragma once

// Dense channel x height x width feature maps and the three operations the
// fusion equations need: channel concatenation, elementwise sums and 1x1
// projections.

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

namespace lsnet {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  std::size_t plane() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool same_spatial(const Shape& o) const { return height == o.height && width == o.width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Channel-major (channel, row, column) map of finite doubles.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Zero-filled map. Throws InvalidConfig on non-positive dims.
  explicit FeatureMap(Shape shape);
  FeatureMap(Shape shape, double fill);
  /// Takes ownership of `values`; length must equal shape.size() and all
  /// entries must be finite.
  FeatureMap(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }

  double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[index(c, y, x)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Contiguous view of one channel plane.
  std::span<const double> channel(int c) const {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * shape_.plane(),
                                                     shape_.plane());
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_.height) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(x);
  }

  Shape shape_{};
  std::vector<double> values_;
};

/// Weights of a 1x1 convolution: out = matrix * in + bias at every site.
/// `matrix` is row-major, out_channels rows by in_channels columns.
struct ProjectionWeights {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<double> matrix;
  std::vector<double> bias;

  ProjectionWeights() = default;
  /// Zero matrix and zero bias.
  ProjectionWeights(int out, int in);
  ProjectionWeights(int out, int in, std::vector<double> matrix, std::vector<double> bias);

  double& weight(int o, int i) { return matrix[static_cast<std::size_t>(o) * in_channels + i]; }
  double weight(int o, int i) const {
    return matrix[static_cast<std::size_t>(o) * in_channels + i];
  }

  static ProjectionWeights identity(int channels);

  friend bool operator==(const ProjectionWeights&, const ProjectionWeights&) = default;
};

FeatureMap concat_channels(std::span<const FeatureMap> maps);
FeatureMap concat_channels(std::initializer_list<FeatureMap> maps);

FeatureMap add_elementwise(const FeatureMap& a, const FeatureMap& b);

/// Elementwise sum with a fixed left-to-right reduction order, so the result
/// is bit-reproducible for a given input order.
FeatureMap sum_maps(std::span<const FeatureMap> maps);
FeatureMap sum_maps(std::initializer_list<FeatureMap> maps);

FeatureMap project_1x1(const FeatureMap& map, const ProjectionWeights& w);

/// Debug dump: a "C H W" header line followed by C*H*W values, one per line,
/// channel-major. Values are written with enough digits to round-trip.
void write_dump(std::ostream& os, const FeatureMap& map);
FeatureMap read_dump(std::istream& is);

}  // namespace lsnet
