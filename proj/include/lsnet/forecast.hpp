#pragma once

// Box-level detectors used as stand-ins for trained networks: a delayed
// ground-truth oracle, two-frame constant-velocity extrapolation and a
// least-squares fit over a longer history.

#include <cstdint>
#include <span>
#include <vector>

#include "lsnet/boxes.hpp"
#include "lsnet/scene.hpp"

namespace lsnet {

/// Ground truth of frame max(0, k - latency_frames), each box scored 1.0.
std::vector<Detection> delayed_gt_detect(const TruthStream& truth, int latency_frames,
                                         std::int64_t k);

/// curr + steps * (curr - prev), per coordinate.
BBox const_velocity_forecast(const BBox& prev, const BBox& curr, int steps);

struct BoxSample {
  std::int64_t frame_index = 0;
  BBox box;
};

/// Fits every box coordinate with a least-squares polynomial of degree
/// min(2, samples - 1) over frame index and evaluates it at target_index.
/// Two samples reduce to the constant-velocity rule. Throws SingularFit on
/// repeated indices and EmptyInput on an empty history.
BBox long_short_forecast(std::span<const BoxSample> history, std::int64_t target_index);

/// Forecasting detector over a truth stream. It observes each track at
/// frames k, k - delta_t, ..., k - n_history * delta_t (where visible) and
/// predicts the box `steps` frames ahead. n_history == 0 holds the current
/// box; n_history == 1 is two-frame constant velocity.
struct ForecastDetector {
  const TruthStream* truth = nullptr;
  int n_history = 3;
  int delta_t = 1;
  int steps = 1;

  std::vector<Detection> operator()(std::int64_t k) const;
};

}  // namespace lsnet
