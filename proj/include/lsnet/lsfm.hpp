#pragma once

// Long-short fusion: merges the current feature map with N buffered history
// maps. Four schemes are supported, early vs late fusion crossed with equal
// (average) vs dilated channel budgets.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "lsnet/tensor.hpp"

namespace lsnet {

enum class FusionVariant { EfAvg, EfDil, LfAvg, LfDil };

std::string_view to_string(FusionVariant v);
/// Accepts "EfAvg" style names and the long "LSFM-Ef-Avg" form.
FusionVariant parse_fusion_variant(std::string_view name);

struct LsfmConfig {
  FusionVariant variant = FusionVariant::LfDil;
  int n_history = 3;
  int delta_t = 1;
  int d = 0;
  double ratio = 0.5;
  bool residual = true;

  /// Dilated late fusion, N=3, stride 1, ratio 0.5, residual on.
  static LsfmConfig defaults(int d);

  /// Throws InvalidConfig unless 0 < ratio < 1, n_history >= 1, delta_t >= 1
  /// and d >= 2.
  void validate() const;

  friend bool operator==(const LsfmConfig&, const LsfmConfig&) = default;
};

/// Output widths of the short (current-frame) and long (history) projections.
/// A branch width of zero means the branch is dropped from the concat.
struct ChannelPlan {
  int short_out = 0;
  int long_out = 0;
  int pre_projection_total = 0;
  bool needs_output_projection = false;

  friend bool operator==(const ChannelPlan&, const ChannelPlan&) = default;
};

ChannelPlan plan_channels(const LsfmConfig& cfg);

struct LsfmWeights {
  std::optional<ProjectionWeights> short_proj;
  std::optional<ProjectionWeights> long_proj;  // shared by every history frame
  std::optional<ProjectionWeights> avg_proj;   // shared by all N+1 frames
  std::optional<ProjectionWeights> output_proj;
};

/// Seeded weights whose shapes follow `plan`. Seed 0 is reserved: it yields
/// all-zero matrices and biases. Throws InvalidConfig when every fusion branch
/// has zero width (e.g. d=2 with N=3 under average late fusion).
LsfmWeights init_weights(const LsfmConfig& cfg, const ChannelPlan& plan, std::uint64_t seed);

/// Fuses `current` (F_t) with `history`, ordered most recent first
/// (history[i] holds the frame i+1 strides back). Output shape equals the
/// input shape. Projection is applied before the residual add.
FeatureMap fuse(const LsfmConfig& cfg, const LsfmWeights& w, const FeatureMap& current,
                std::span<const FeatureMap> history);

/// Multiply-add FLOPs (2 per MAC) of every projection applied for one fused
/// frame, plus one FLOP per element for every elementwise add.
std::uint64_t count_fusion_flops(const LsfmConfig& cfg, const ChannelPlan& plan, int height,
                                 int width);

}  // namespace lsnet
