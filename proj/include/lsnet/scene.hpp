#pragma once

// Synthetic driving scenes covering the motion cases that break two-frame
// forecasting: acceleration, turning, occlusion and small objects.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsnet/boxes.hpp"

namespace lsnet {

enum class MotionKind { Uniform, Accelerating, Turning, Occluded, SmallObject };

std::string_view to_string(MotionKind kind);
MotionKind parse_motion_kind(std::string_view name);

/// COCO "small" boundary, 32x32 px.
inline constexpr double kSmallAreaThreshold = 32.0 * 32.0;
/// COCO "large" boundary, 96x96 px.
inline constexpr double kLargeAreaThreshold = 96.0 * 96.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct OcclusionWindow {
  std::int64_t first = 0;  // inclusive
  std::int64_t last = 0;   // inclusive
  bool contains(std::int64_t k) const { return k >= first && k <= last; }
  friend bool operator==(const OcclusionWindow&, const OcclusionWindow&) = default;
};

struct TrajectorySpec {
  MotionKind kind = MotionKind::Uniform;
  BBox initial;
  Vec2 velocity;      // px / frame
  Vec2 acceleration;  // px / frame^2
  double turn_rate = 0.0;  // rad / frame, Turning only
  Vec2 pivot;              // centre of rotation, Turning only
  std::optional<OcclusionWindow> occlusion;
  int category = 1;
};

struct SyntheticScene {
  int n_frames = 30;
  double frame_interval_ms = 33.33;
  int image_width = 1280;
  int image_height = 720;
  std::vector<TrajectorySpec> trajectories;
  std::uint64_t seed = 0;
  /// Uniform per-frame centre jitter amplitude in px; 0 disables noise.
  double jitter_px = 0.0;
  /// When false, frames carry no pixel payload.
  bool render_pixels = false;
};

struct SceneFrame {
  Frame frame;
  std::vector<GroundTruthBox> truth;
};

/// Unclipped, unquantized box of a trajectory at frame k.
BBox trajectory_box(const TrajectorySpec& spec, std::int64_t k);

/// Throws InvalidConfig when kind-specific parameters are missing or the
/// scene is malformed.
void validate_scene(const SyntheticScene& scene);

/// Per-frame ground truth. Boxes are clipped to the image, dropped while
/// occluded or fully outside, and snapped to a 1/256 px grid so corner and
/// (x, y, w, h) forms convert without rounding. Throws DegenerateTrajectory
/// if some trajectory is never inside the image.
std::vector<SceneFrame> generate_scenario(const SyntheticScene& scene);

/// Frame-indexed ground truth, the shape every evaluator consumes.
using TruthStream = std::vector<std::vector<GroundTruthBox>>;
TruthStream truth_stream(std::span<const SceneFrame> frames);

/// Bundled scenes: static, uniform, accelerating, turning, occluded, small,
/// mixed.
SyntheticScene preset_scene(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace lsnet
