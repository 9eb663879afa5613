#include "lsnet/scene.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lsnet/error.hpp"

namespace lsnet {

std::string_view to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::Uniform: return "Uniform";
    case MotionKind::Accelerating: return "Accelerating";
    case MotionKind::Turning: return "Turning";
    case MotionKind::Occluded: return "Occluded";
    case MotionKind::SmallObject: return "SmallObject";
  }
  return "?";
}

MotionKind parse_motion_kind(std::string_view name) {
  for (auto k : {MotionKind::Uniform, MotionKind::Accelerating, MotionKind::Turning,
                 MotionKind::Occluded, MotionKind::SmallObject}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown motion kind '{}'", name));
}

BBox trajectory_box(const TrajectorySpec& spec, std::int64_t k) {
  const double t = static_cast<double>(k);
  const double dx = spec.velocity.x * t + 0.5 * spec.acceleration.x * t * t;
  const double dy = spec.velocity.y * t + 0.5 * spec.acceleration.y * t * t;
  BBox box = spec.initial.shifted(dx, dy);
  if (spec.kind != MotionKind::Turning) return box;

  const double cx = 0.5 * (box.x_min + box.x_max) - spec.pivot.x;
  const double cy = 0.5 * (box.y_min + box.y_max) - spec.pivot.y;
  const double angle = spec.turn_rate * t;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double rx = spec.pivot.x + c * cx - s * cy;
  const double ry = spec.pivot.y + s * cx + c * cy;
  const double hw = 0.5 * box.width();
  const double hh = 0.5 * box.height();
  return {rx - hw, ry - hh, rx + hw, ry + hh};
}

void validate_scene(const SyntheticScene& scene) {
  if (scene.n_frames < 2) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("scene needs >= 2 frames, got {}",
                                                      scene.n_frames));
  }
  if (!(scene.frame_interval_ms > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "frame_interval_ms must be positive");
  }
  if (scene.image_width <= 0 || scene.image_height <= 0) {
    throw Error(ErrorCode::InvalidConfig, "image dims must be positive");
  }
  if (scene.jitter_px < 0.0) throw Error(ErrorCode::InvalidConfig, "jitter_px must be >= 0");
  for (std::size_t i = 0; i < scene.trajectories.size(); ++i) {
    const auto& t = scene.trajectories[i];
    auto fail = [&](std::string_view why) {
      throw Error(ErrorCode::InvalidConfig,
                  fmt::format("trajectory {} ({}): {}", i, to_string(t.kind), why));
    };
    if (!t.initial.valid()) fail("initial box has negative extent");
    if (t.occlusion && t.occlusion->first > t.occlusion->last) fail("empty occlusion window");
    switch (t.kind) {
      case MotionKind::Uniform:
        if (t.acceleration.x != 0.0 || t.acceleration.y != 0.0) fail("uniform motion with acceleration");
        break;
      case MotionKind::Accelerating:
        if (t.acceleration.x == 0.0 && t.acceleration.y == 0.0) fail("zero acceleration");
        break;
      case MotionKind::Turning:
        if (t.turn_rate == 0.0) fail("zero turn rate");
        break;
      case MotionKind::Occluded:
        if (!t.occlusion) fail("missing occlusion window");
        break;
      case MotionKind::SmallObject:
        if (!(t.initial.area() < kSmallAreaThreshold)) fail("box is not small");
        break;
    }
  }
}

namespace {

double snap(double v) { return std::round(v * 256.0) / 256.0; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::optional<BBox> clip(const BBox& b, int width, int height) {
  BBox c{std::clamp(b.x_min, 0.0, static_cast<double>(width)),
         std::clamp(b.y_min, 0.0, static_cast<double>(height)),
         std::clamp(b.x_max, 0.0, static_cast<double>(width)),
         std::clamp(b.y_max, 0.0, static_cast<double>(height))};
  c = {snap(c.x_min), snap(c.y_min), snap(c.x_max), snap(c.y_max)};
  if (c.width() <= 0.0 || c.height() <= 0.0) return std::nullopt;
  return c;
}

void render(Image& img, const BBox& b) {
  // A pixel is lit when its centre lies inside the box.
  const int x0 = std::max(0, static_cast<int>(std::ceil(b.x_min - 0.5)));
  const int x1 = std::min(img.width, static_cast<int>(std::ceil(b.x_max - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(b.y_min - 0.5)));
  const int y1 = std::min(img.height, static_cast<int>(std::ceil(b.y_max - 0.5)));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.at(0, y, x) = 255;
  }
}

}  // namespace

std::vector<SceneFrame> generate_scenario(const SyntheticScene& scene) {
  validate_scene(scene);
  std::mt19937_64 rng(scene.seed);
  std::vector<SceneFrame> out(static_cast<std::size_t>(scene.n_frames));
  std::vector<bool> ever_visible(scene.trajectories.size(), false);

  for (int k = 0; k < scene.n_frames; ++k) {
    auto& sf = out[static_cast<std::size_t>(k)];
    sf.frame.index = k;
    sf.frame.timestamp_ms = k * scene.frame_interval_ms;
    if (scene.render_pixels) {
      sf.frame.pixels = Image{scene.image_width, scene.image_height, 1,
                              std::vector<std::uint8_t>(static_cast<std::size_t>(scene.image_width) *
                                                        scene.image_height)};
    }
    for (std::size_t i = 0; i < scene.trajectories.size(); ++i) {
      const auto& traj = scene.trajectories[i];
      BBox box = trajectory_box(traj, k);
      if (scene.jitter_px > 0.0) {
        // Always draw both offsets so the noise sequence does not depend on
        // which boxes end up visible.
        const double jx = uniform(rng, -scene.jitter_px, scene.jitter_px);
        const double jy = uniform(rng, -scene.jitter_px, scene.jitter_px);
        box = box.shifted(jx, jy);
      }
      const auto clipped = clip(box, scene.image_width, scene.image_height);
      if (!clipped) continue;
      ever_visible[i] = true;
      if (traj.occlusion && traj.occlusion->contains(k)) continue;
      sf.truth.push_back({*clipped, traj.category, static_cast<int>(i), k});
      if (scene.render_pixels) render(sf.frame.pixels, *clipped);
    }
  }
  for (std::size_t i = 0; i < ever_visible.size(); ++i) {
    if (!ever_visible[i]) {
      throw Error(ErrorCode::DegenerateTrajectory,
                  fmt::format("trajectory {} never enters the {}x{} image", i, scene.image_width,
                              scene.image_height));
    }
  }
  return out;
}

TruthStream truth_stream(std::span<const SceneFrame> frames) {
  TruthStream s;
  s.reserve(frames.size());
  for (const auto& f : frames) s.push_back(f.truth);
  return s;
}

namespace {

BBox box_at(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

TrajectorySpec uniform(BBox b, Vec2 v, int category = 1) {
  TrajectorySpec t;
  t.kind = MotionKind::Uniform;
  t.initial = b;
  t.velocity = v;
  t.category = category;
  return t;
}

TrajectorySpec accelerating(BBox b, Vec2 v, Vec2 a, int category = 1) {
  TrajectorySpec t = uniform(b, v, category);
  t.kind = MotionKind::Accelerating;
  t.acceleration = a;
  return t;
}

TrajectorySpec turning(BBox b, Vec2 pivot, double rate, int category = 1) {
  TrajectorySpec t = uniform(b, {}, category);
  t.kind = MotionKind::Turning;
  t.pivot = pivot;
  t.turn_rate = rate;
  return t;
}

TrajectorySpec occluded(BBox b, Vec2 v, OcclusionWindow w, int category = 1) {
  TrajectorySpec t = uniform(b, v, category);
  t.kind = MotionKind::Occluded;
  t.occlusion = w;
  return t;
}

TrajectorySpec small(BBox b, Vec2 v, int category = 1) {
  TrajectorySpec t = uniform(b, v, category);
  t.kind = MotionKind::SmallObject;
  return t;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"static", "uniform", "accelerating", "turning", "occluded", "small", "mixed"};
}

SyntheticScene preset_scene(std::string_view name) {
  SyntheticScene s;
  // Every preset carries a small, a medium and a large object so all size
  // splits of the report are populated.
  if (name == "static") {
    s.trajectories = {uniform(box_at(100, 100, 24, 24), {}),
                      uniform(box_at(400, 200, 64, 48), {}),
                      uniform(box_at(700, 300, 160, 120), {}, 2)};
  } else if (name == "uniform") {
    s.trajectories = {uniform(box_at(40, 60, 24, 24), {2, 0}),
                      uniform(box_at(200, 200, 64, 48), {3, 1}),
                      uniform(box_at(500, 400, 160, 120), {4, -1}, 2)};
  } else if (name == "accelerating") {
    s.trajectories = {accelerating(box_at(40, 40, 24, 24), {1, 0}, {2, 1}),
                      accelerating(box_at(60, 300, 64, 48), {0, 0}, {1.5, 0}),
                      accelerating(box_at(100, 500, 160, 120), {2, -1}, {1, 0}, 2)};
  } else if (name == "turning") {
    s.trajectories = {turning(box_at(628, 148, 24, 24), {640, 360}, 0.05),
                      turning(box_at(308, 336, 64, 48), {640, 360}, -0.04),
                      turning(box_at(820, 300, 160, 120), {640, 360}, 0.03, 2)};
  } else if (name == "occluded") {
    s.trajectories = {occluded(box_at(40, 60, 24, 24), {3, 0}, {10, 14}),
                      occluded(box_at(200, 200, 64, 48), {4, 1}, {5, 9}),
                      uniform(box_at(500, 400, 160, 120), {2, 0}, 2)};
  } else if (name == "small") {
    s.trajectories = {small(box_at(40, 40, 12, 12), {3, 1}),
                      small(box_at(300, 100, 20, 16), {-2, 2}),
                      small(box_at(600, 500, 28, 28), {4, -3}, 2),
                      uniform(box_at(900, 200, 64, 48), {1, 1})};
  } else if (name == "mixed") {
    s.trajectories = {accelerating(box_at(40, 40, 40, 30), {1, 0}, {1.5, 0.5}),
                      turning(box_at(628, 148, 48, 36), {640, 360}, 0.05),
                      occluded(box_at(200, 600, 64, 48), {5, -1}, {12, 16}),
                      small(box_at(900, 100, 16, 16), {-3, 2}),
                      uniform(box_at(300, 300, 160, 120), {2, 1}, 2)};
  } else {
    throw Error(ErrorCode::InvalidConfig, fmt::format("unknown scene preset '{}'", name));
  }
  return s;
}

}  // namespace lsnet
