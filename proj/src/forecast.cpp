#include "lsnet/forecast.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "lsnet/error.hpp"

namespace lsnet {

std::vector<Detection> delayed_gt_detect(const TruthStream& truth, int latency_frames,
                                         std::int64_t k) {
  if (truth.empty()) return {};
  std::int64_t src = std::max<std::int64_t>(0, k - std::max(latency_frames, 0));
  src = std::min<std::int64_t>(src, static_cast<std::int64_t>(truth.size()) - 1);
  std::vector<Detection> out;
  for (const auto& gt : truth[static_cast<std::size_t>(src)]) out.push_back({gt.bbox, gt.category, 1.0});
  return out;
}

BBox const_velocity_forecast(const BBox& prev, const BBox& curr, int steps) {
  const double s = static_cast<double>(steps);
  return {curr.x_min + s * (curr.x_min - prev.x_min), curr.y_min + s * (curr.y_min - prev.y_min),
          curr.x_max + s * (curr.x_max - prev.x_max), curr.y_max + s * (curr.y_max - prev.y_max)};
}

namespace {

std::array<double, 4> coords(const BBox& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

}  // namespace

BBox long_short_forecast(std::span<const BoxSample> history, std::int64_t target_index) {
  if (history.empty()) throw Error(ErrorCode::EmptyInput, "forecast needs at least one sample");
  for (std::size_t i = 0; i < history.size(); ++i) {
    for (std::size_t j = i + 1; j < history.size(); ++j) {
      if (history[i].frame_index == history[j].frame_index) {
        throw Error(ErrorCode::SingularFit,
                    fmt::format("frame index {} appears twice in the history",
                                history[i].frame_index));
      }
    }
  }
  if (history.size() == 1) return history.front().box;

  if (history.size() == 2) {
    const auto& [a, b] = history[0].frame_index < history[1].frame_index
                             ? std::pair{history[0], history[1]}
                             : std::pair{history[1], history[0]};
    const double s = static_cast<double>(target_index - b.frame_index) /
                     static_cast<double>(b.frame_index - a.frame_index);
    return {b.box.x_min + s * (b.box.x_min - a.box.x_min),
            b.box.y_min + s * (b.box.y_min - a.box.y_min),
            b.box.x_max + s * (b.box.x_max - a.box.x_max),
            b.box.y_max + s * (b.box.y_max - a.box.y_max)};
  }

  // Quadratic in t = (index - target) / scale, so the prediction is the
  // constant coefficient and the design matrix stays well conditioned.
  const auto n = static_cast<Eigen::Index>(history.size());
  double scale = 0.0;
  for (const auto& s : history) {
    scale = std::max(scale, std::abs(static_cast<double>(s.frame_index - target_index)));
  }
  if (scale == 0.0) scale = 1.0;
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd rhs(n, 4);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = history[static_cast<std::size_t>(r)];
    const double t = static_cast<double>(s.frame_index - target_index) / scale;
    design(r, 0) = 1.0;
    design(r, 1) = t;
    design(r, 2) = t * t;
    const auto c = coords(s.box);
    for (int j = 0; j < 4; ++j) rhs(r, j) = c[static_cast<std::size_t>(j)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw Error(ErrorCode::SingularFit, "design matrix is rank deficient");
  const Eigen::MatrixXd coef = qr.solve(rhs);
  return {coef(0, 0), coef(0, 1), coef(0, 2), coef(0, 3)};
}

std::vector<Detection> ForecastDetector::operator()(std::int64_t k) const {
  if (truth == nullptr || k < 0 || k >= static_cast<std::int64_t>(truth->size())) return {};
  const auto& now = (*truth)[static_cast<std::size_t>(k)];
  std::vector<Detection> out;
  out.reserve(now.size());
  std::vector<BoxSample> samples;
  for (const auto& gt : now) {
    samples.clear();
    samples.push_back({k, gt.bbox});
    for (int i = 1; i <= n_history; ++i) {
      const std::int64_t f = k - static_cast<std::int64_t>(i) * delta_t;
      if (f < 0) break;
      const auto& past = (*truth)[static_cast<std::size_t>(f)];
      auto it = std::find_if(past.begin(), past.end(),
                             [&](const GroundTruthBox& g) { return g.track_id == gt.track_id; });
      if (it != past.end()) samples.push_back({f, it->bbox});
    }
    BBox box = gt.bbox;
    if (samples.size() >= 2) {
      if (n_history == 1 && delta_t == 1) {
        box = const_velocity_forecast(samples[1].box, samples[0].box, steps);
      } else {
        box = long_short_forecast(samples, k + steps);
      }
    }
    out.push_back({box, gt.category, 1.0});
  }
  return out;
}

}  // namespace lsnet
