#include "lsnet/tensor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "lsnet/error.hpp"

namespace lsnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SpatialMismatch: return "SpatialMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::HistoryLengthMismatch: return "HistoryLengthMismatch";
    case ErrorCode::NonMonotonicIndex: return "NonMonotonicIndex";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::SingularFit: return "SingularFit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

void check_shape(const Shape& s) {
  if (s.channels <= 0 || s.height <= 0 || s.width <= 0) {
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("feature map dims must be positive, got {}x{}x{}", s.channels,
                            s.height, s.width));
  }
}

std::string describe(const Shape& s) {
  return fmt::format("{}x{}x{}", s.channels, s.height, s.width);
}

}  // namespace

FeatureMap::FeatureMap(Shape shape) : FeatureMap(shape, 0.0) {}

FeatureMap::FeatureMap(Shape shape, double fill) : shape_(shape) {
  check_shape(shape_);
  if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidConfig, "non-finite fill value");
  values_.assign(shape_.size(), fill);
}

FeatureMap::FeatureMap(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} values for shape {}", values_.size(), describe(shape_)));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::InvalidConfig, "feature map values must be finite");
  }
}

ProjectionWeights::ProjectionWeights(int out, int in)
    : ProjectionWeights(out, in,
                        std::vector<double>(static_cast<std::size_t>(std::max(out, 0)) *
                                            static_cast<std::size_t>(std::max(in, 0))),
                        std::vector<double>(static_cast<std::size_t>(std::max(out, 0)))) {}

ProjectionWeights::ProjectionWeights(int out, int in, std::vector<double> m, std::vector<double> b)
    : out_channels(out), in_channels(in), matrix(std::move(m)), bias(std::move(b)) {
  if (out <= 0 || in <= 0) {
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("projection dims must be positive, got {}->{}", in, out));
  }
  if (matrix.size() != static_cast<std::size_t>(out) * static_cast<std::size_t>(in) ||
      bias.size() != static_cast<std::size_t>(out)) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("projection {}->{} given {} weights and {} biases", in, out,
                            matrix.size(), bias.size()));
  }
}

ProjectionWeights ProjectionWeights::identity(int channels) {
  ProjectionWeights w(channels, channels);
  for (int i = 0; i < channels; ++i) w.weight(i, i) = 1.0;
  return w;
}

FeatureMap concat_channels(std::span<const FeatureMap> maps) {
  if (maps.empty()) throw Error(ErrorCode::EmptyInput, "concat_channels of no maps");
  const Shape& first = maps.front().shape();
  int total = 0;
  for (const auto& m : maps) {
    if (!m.shape().same_spatial(first)) {
      throw Error(ErrorCode::SpatialMismatch,
                  fmt::format("cannot concat {} with {}", describe(m.shape()), describe(first)));
    }
    total += m.channels();
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * first.plane());
  for (const auto& m : maps) out.insert(out.end(), m.values().begin(), m.values().end());
  return FeatureMap({total, first.height, first.width}, std::move(out));
}

FeatureMap concat_channels(std::initializer_list<FeatureMap> maps) {
  return concat_channels(std::span<const FeatureMap>(maps.begin(), maps.size()));
}

FeatureMap add_elementwise(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("cannot add {} and {}", describe(a.shape()), describe(b.shape())));
  }
  FeatureMap out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

FeatureMap sum_maps(std::span<const FeatureMap> maps) {
  if (maps.empty()) throw Error(ErrorCode::EmptyInput, "sum_maps of no maps");
  FeatureMap acc = maps.front();
  for (std::size_t k = 1; k < maps.size(); ++k) {
    if (maps[k].shape() != acc.shape()) {
      throw Error(ErrorCode::ShapeMismatch, fmt::format("sum_maps: map {} is {}, expected {}", k,
                                                        describe(maps[k].shape()),
                                                        describe(acc.shape())));
    }
    auto dst = acc.values();
    auto src = maps[k].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return acc;
}

FeatureMap sum_maps(std::initializer_list<FeatureMap> maps) {
  return sum_maps(std::span<const FeatureMap>(maps.begin(), maps.size()));
}

FeatureMap project_1x1(const FeatureMap& map, const ProjectionWeights& w) {
  if (map.channels() != w.in_channels) {
    throw Error(ErrorCode::ChannelMismatch,
                fmt::format("projection expects {} channels, map has {}", w.in_channels,
                            map.channels()));
  }
  const std::size_t plane = map.shape().plane();
  std::vector<double> out(static_cast<std::size_t>(w.out_channels) * plane);
  auto in = map.values();
  // Accumulate whole planes so the inner loop runs over contiguous memory.
  for (int o = 0; o < w.out_channels; ++o) {
    double* dst = out.data() + static_cast<std::size_t>(o) * plane;
    std::fill(dst, dst + plane, w.bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < w.in_channels; ++i) {
      const double k = w.weight(o, i);
      if (k == 0.0) continue;
      const double* src = in.data() + static_cast<std::size_t>(i) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += k * src[p];
    }
  }
  return FeatureMap({w.out_channels, map.height(), map.width()}, std::move(out));
}

void write_dump(std::ostream& os, const FeatureMap& map) {
  os << fmt::format("{} {} {}\n", map.channels(), map.height(), map.width());
  for (double v : map.values()) os << fmt::format("{}\n", v);
}

FeatureMap read_dump(std::istream& is) {
  Shape s;
  if (!(is >> s.channels >> s.height >> s.width)) {
    throw Error(ErrorCode::ParseError, "dump header must be \"C H W\"");
  }
  check_shape(s);
  std::vector<double> values(s.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::string tok;
    if (!(is >> tok)) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("dump ended after {} of {} values", i, values.size()));
    }
    try {
      values[i] = std::stod(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, fmt::format("bad value '{}' at position {}", tok, i));
    }
  }
  return FeatureMap(s, std::move(values));
}

}  // namespace lsnet
