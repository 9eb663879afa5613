#include "lsnet/dual_path.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "lsnet/error.hpp"

namespace lsnet {

std::array<int, 3> level_channels(ModelSize size) {
  switch (size) {
    case ModelSize::S: return {128, 256, 512};
    case ModelSize::M: return {192, 384, 768};
    case ModelSize::L: return {256, 512, 1024};
  }
  return {};
}

// ---- extractor --------------------------------------------------------------

BoxFilterExtractor::BoxFilterExtractor(std::array<int, 3> channels) : channels_(channels) {
  for (int c : channels_) {
    if (c < 1) throw Error(ErrorCode::InvalidConfig, "extractor channel widths must be positive");
  }
}

namespace {

FeatureMap box_pool(const Image& img, int rate) {
  const int h = (img.height + rate - 1) / rate;
  const int w = (img.width + rate - 1) / rate;
  FeatureMap out({img.planes, h, w});
  for (int p = 0; p < img.planes; ++p) {
    for (int y = 0; y < h; ++y) {
      const int y0 = y * rate;
      const int y1 = std::min(img.height, y0 + rate);
      for (int x = 0; x < w; ++x) {
        const int x0 = x * rate;
        const int x1 = std::min(img.width, x0 + rate);
        double sum = 0.0;
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) sum += img.at(p, yy, xx);
        }
        out.at(p, y, x) = sum / (255.0 * (y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

// Positive lift weights cycling through {0.5, 5/6, 7/6, 1.5}; their mean is
// one, so the channel mean approximates the pooled intensity.
ProjectionWeights channel_lift(int out, int planes) {
  ProjectionWeights w(out, planes);
  for (int c = 0; c < out; ++c) {
    for (int p = 0; p < planes; ++p) w.weight(c, p) = 0.5 + ((c + p) % 4) / 3.0;
  }
  return w;
}

}  // namespace

FeaturePyramid BoxFilterExtractor::extract(const Frame& frame) {
  const Image& img = frame.pixels;
  if (img.empty() || img.width <= 0 || img.height <= 0 || img.planes <= 0) {
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("frame {} carries no pixels to extract from", frame.index));
  }
  ++calls_;
  FeaturePyramid pyr;
  for (std::size_t l = 0; l < kPyramidRates.size(); ++l) {
    FeatureMap pooled = box_pool(img, kPyramidRates[l]);
    pyr.levels.push_back(project_1x1(pooled, channel_lift(channels_[l], img.planes)));
  }
  return pyr;
}

// ---- head -------------------------------------------------------------------

std::vector<Detection> BlobHead::predict(const FeaturePyramid& fused) {
  if (fused.levels.empty()) return {};
  const FeatureMap& fine = fused.levels.front();
  const int h = fine.height();
  const int w = fine.width();
  const int rate = kPyramidRates.front();

  std::vector<double> act(static_cast<std::size_t>(h) * w, 0.0);
  for (int c = 0; c < fine.channels(); ++c) {
    auto plane = fine.channel(c);
    for (std::size_t i = 0; i < act.size(); ++i) act[i] += plane[i];
  }
  for (double& a : act) a /= fine.channels();

  std::vector<int> label(act.size(), -1);
  std::vector<Detection> out;
  std::vector<int> stack;
  for (int start = 0; start < h * w; ++start) {
    if (label[static_cast<std::size_t>(start)] >= 0 || act[static_cast<std::size_t>(start)] < threshold_) continue;
    const int id = static_cast<int>(out.size());
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    double sum = 0.0;
    int count = 0;
    stack.assign(1, start);
    label[static_cast<std::size_t>(start)] = id;
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      const int y = s / w;
      const int x = s % w;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      sum += act[static_cast<std::size_t>(s)];
      ++count;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
        const int ni = n[1] * w + n[0];
        if (label[static_cast<std::size_t>(ni)] >= 0 || act[static_cast<std::size_t>(ni)] < threshold_) continue;
        label[static_cast<std::size_t>(ni)] = id;
        stack.push_back(ni);
      }
    }
    const double score = std::clamp(sum / count, 0.0, 1.0);
    out.push_back({{static_cast<double>(x0 * rate), static_cast<double>(y0 * rate),
                    static_cast<double>((x1 + 1) * rate), static_cast<double>((y1 + 1) * rate)},
                   category_,
                   score});
  }
  return out;
}

// ---- buffer -----------------------------------------------------------------

FeatureBuffer::FeatureBuffer(std::size_t capacity, PaddingPolicy padding)
    : capacity_(capacity), padding_(padding) {}

void FeatureBuffer::push(std::int64_t index, FeaturePyramid pyramid) {
  if (last_pushed_ && index <= *last_pushed_) {
    throw Error(ErrorCode::NonMonotonicIndex,
                fmt::format("pushed frame {} after frame {}", index, *last_pushed_));
  }
  last_pushed_ = index;
  if (capacity_ == 0) return;
  slots_.emplace(index, std::move(pyramid));
  while (slots_.size() > capacity_) slots_.erase(slots_.begin());
}

const FeaturePyramid* FeatureBuffer::find(std::int64_t index) const {
  auto it = slots_.find(index);
  return it == slots_.end() ? nullptr : &it->second;
}

std::vector<std::int64_t> FeatureBuffer::indices() const {
  std::vector<std::int64_t> out;
  out.reserve(slots_.size());
  for (const auto& [k, v] : slots_) out.push_back(k);
  return out;
}

std::optional<std::int64_t> FeatureBuffer::last_index() const { return last_pushed_; }

std::vector<FeaturePyramid> FeatureBuffer::gather(std::int64_t t, int n, int delta_t,
                                                  const FeaturePyramid& current) const {
  std::vector<FeaturePyramid> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) {
    const std::int64_t idx = t - static_cast<std::int64_t>(i) * delta_t;
    if (const FeaturePyramid* p = idx >= 0 ? find(idx) : nullptr) {
      out.push_back(*p);
    } else if (padding_ == PaddingPolicy::ReplicateCurrent) {
      out.push_back(current);
    } else {
      FeaturePyramid zeros;
      for (const auto& level : current.levels) zeros.levels.emplace_back(level.shape());
      out.push_back(std::move(zeros));
    }
  }
  return out;
}

// ---- network ----------------------------------------------------------------

FeaturePyramid fuse_pyramid(std::span<const LsfmConfig> cfgs, std::span<const LsfmWeights> weights,
                            const FeaturePyramid& current, std::span<const FeaturePyramid> history) {
  if (cfgs.size() != current.levels.size() || weights.size() != current.levels.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("pyramid has {} levels, fusion configured for {}",
                            current.levels.size(), cfgs.size()));
  }
  FeaturePyramid fused;
  std::vector<FeatureMap> level_history;
  for (std::size_t l = 0; l < current.levels.size(); ++l) {
    level_history.clear();
    for (const auto& h : history) {
      if (h.levels.size() != current.levels.size()) {
        throw Error(ErrorCode::ShapeMismatch, "history pyramid level count differs");
      }
      level_history.push_back(h.levels[l]);
    }
    fused.levels.push_back(fuse(cfgs[l], weights[l], current.levels[l], level_history));
  }
  return fused;
}

namespace {

std::size_t buffer_capacity(const DualPathConfig& cfg) {
  if (!cfg.fusion) return 0;
  return static_cast<std::size_t>(cfg.fusion->n_history) *
         static_cast<std::size_t>(cfg.fusion->delta_t);
}

}  // namespace

DualPathNet::DualPathNet(FeatureExtractor& extractor, DetectionHead& head, DualPathConfig cfg)
    : extractor_(extractor),
      head_(head),
      cfg_(cfg),
      buffer_(buffer_capacity(cfg), cfg.padding) {
  if (!cfg_.fusion) return;
  const auto widths = extractor_.channels();
  for (std::size_t l = 0; l < widths.size(); ++l) {
    LsfmConfig level = *cfg_.fusion;
    level.d = widths[l];
    // Seed 0 stays 0 on every level so the all-zero contract holds network-wide.
    const std::uint64_t seed = cfg_.weight_seed == 0 ? 0 : cfg_.weight_seed + l;
    level_weights_.push_back(init_weights(level, plan_channels(level), seed));
    level_cfgs_.push_back(level);
  }
}

StepOutput DualPathNet::step(const Frame& frame) {
  FeaturePyramid current = extractor_.extract(frame);
  StepOutput out;
  if (cfg_.fusion) {
    const auto history =
        buffer_.gather(frame.index, cfg_.fusion->n_history, cfg_.fusion->delta_t, current);
    out.fused = fuse_pyramid(level_cfgs_, level_weights_, current, history);
  } else {
    out.fused = current;
  }
  out.detections = head_.predict(out.fused);
  buffer_.push(frame.index, std::move(current));
  return out;
}

}  // namespace lsnet
