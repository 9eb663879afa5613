#pragma once

// Dual-path network assembly. One extractor pass per frame produces the
// current pyramid (short path); the long path reads earlier pyramids from a
// frame-indexed buffer instead of re-running the extractor.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "lsnet/boxes.hpp"
#include "lsnet/lsfm.hpp"
#include "lsnet/tensor.hpp"

namespace lsnet {

/// Down-sampling rates of the three pyramid levels.
inline constexpr std::array<int, 3> kPyramidRates{8, 16, 32};

struct FeaturePyramid {
  std::vector<FeatureMap> levels;  // ordered /8, /16, /32
  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

enum class ModelSize { S, M, L };

/// Per-level channel widths (/8, /16, /32) of each model size.
std::array<int, 3> level_channels(ModelSize size);

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// Must be deterministic: the same frame always yields the same pyramid.
  virtual FeaturePyramid extract(const Frame& frame) = 0;
  virtual std::array<int, 3> channels() const = 0;
};

/// Hand-crafted extractor: box-filter each image plane down to /8, /16, /32
/// (partial edge blocks average the pixels they cover, giving ceil(dim/rate)
/// sites) and lift the pooled planes to the level width with fixed positive
/// 1x1 weights. Counts its invocations.
class BoxFilterExtractor final : public FeatureExtractor {
 public:
  explicit BoxFilterExtractor(std::array<int, 3> channels);
  explicit BoxFilterExtractor(ModelSize size) : BoxFilterExtractor(level_channels(size)) {}

  FeaturePyramid extract(const Frame& frame) override;
  std::array<int, 3> channels() const override { return channels_; }
  std::int64_t call_count() const { return calls_; }

 private:
  std::array<int, 3> channels_;
  std::int64_t calls_ = 0;
};

class DetectionHead {
 public:
  virtual ~DetectionHead() = default;
  virtual std::vector<Detection> predict(const FeaturePyramid& fused) = 0;
};

/// Reads the /8 level: the channel mean at each site is an activation;
/// 4-connected sites at or above `threshold` form one detection whose box is
/// the pixel footprint of the component and whose score is its mean
/// activation clamped to [0, 1].
class BlobHead final : public DetectionHead {
 public:
  explicit BlobHead(double threshold = 0.25, int category = 1)
      : threshold_(threshold), category_(category) {}
  std::vector<Detection> predict(const FeaturePyramid& fused) override;

 private:
  double threshold_;
  int category_;
};

enum class PaddingPolicy { ReplicateCurrent, ZeroPad };

/// Frame-indexed pyramid cache holding at most `capacity` pyramids (N * dt);
/// together with the pyramid of the frame being processed that bounds memory
/// at capacity + 1.
class FeatureBuffer {
 public:
  explicit FeatureBuffer(std::size_t capacity,
                         PaddingPolicy padding = PaddingPolicy::ReplicateCurrent);

  /// Throws NonMonotonicIndex unless index exceeds every stored index.
  /// Evicts the lowest index when over capacity.
  void push(std::int64_t index, FeaturePyramid pyramid);

  /// Pyramids for t - dt, t - 2dt, ..., t - n*dt, most recent first; missing
  /// or negative indices are padded per the policy.
  std::vector<FeaturePyramid> gather(std::int64_t t, int n, int delta_t,
                                     const FeaturePyramid& current) const;

  bool contains(std::int64_t index) const { return slots_.count(index) != 0; }
  const FeaturePyramid* find(std::int64_t index) const;
  std::vector<std::int64_t> indices() const;
  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Most recently pushed index, even when capacity is zero.
  std::optional<std::int64_t> last_index() const;

 private:
  std::size_t capacity_;
  PaddingPolicy padding_;
  std::map<std::int64_t, FeaturePyramid> slots_;
  std::optional<std::int64_t> last_pushed_;
};

/// Fusion settings shared by all pyramid levels; `d` is taken per level.
/// An empty optional disables the long path (current features pass through).
struct DualPathConfig {
  std::optional<LsfmConfig> fusion = LsfmConfig::defaults(2);
  std::uint64_t weight_seed = 7;
  PaddingPolicy padding = PaddingPolicy::ReplicateCurrent;
};

struct StepOutput {
  FeaturePyramid fused;
  std::vector<Detection> detections;
};

/// Owns the buffer and per-level fusion weights; borrows the extractor and
/// head, which must outlive it. Steps must be called in frame order.
class DualPathNet {
 public:
  DualPathNet(FeatureExtractor& extractor, DetectionHead& head, DualPathConfig cfg);

  StepOutput step(const Frame& frame);

  const FeatureBuffer& buffer() const { return buffer_; }
  const std::vector<LsfmConfig>& level_configs() const { return level_cfgs_; }
  const std::vector<LsfmWeights>& level_weights() const { return level_weights_; }

 private:
  FeatureExtractor& extractor_;
  DetectionHead& head_;
  DualPathConfig cfg_;
  std::vector<LsfmConfig> level_cfgs_;
  std::vector<LsfmWeights> level_weights_;
  FeatureBuffer buffer_;
};

/// Fuses each level of `current` with the matching levels of `history`.
FeaturePyramid fuse_pyramid(std::span<const LsfmConfig> cfgs, std::span<const LsfmWeights> weights,
                            const FeaturePyramid& current, std::span<const FeaturePyramid> history);

}  // namespace lsnet
