#pragma once

// Latency-aware streaming protocol on a simulated clock. Frames arrive at
// k * interval; one non-preemptive worker runs the detector; each annotated
// frame is scored against the latest result completed by its arrival time.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lsnet/boxes.hpp"

namespace lsnet {

/// Timestamps closer than this are treated as equal, so a result completing
/// exactly at a query time counts as available despite rounding in k * interval.
inline constexpr double kTimeEpsilonMs = 1e-9;

enum class DispatchPolicy {
  /// When the worker frees up it takes the newest arrived frame; older
  /// unprocessed frames are skipped.
  LatestFrameOnFree,
  /// The worker only starts on a frame at its arrival instant; frames that
  /// arrive while it is busy are dropped.
  DropWhileBusy,
  /// Every frame is processed in order, queueing behind the worker.
  Fifo,
  /// Every frame starts at its arrival and completes after its own latency,
  /// independent of the others (overlapping stages, unbounded workers).
  Pipelined,
};

std::string_view to_string(DispatchPolicy p);
DispatchPolicy parse_dispatch_policy(std::string_view name);

struct LatencyModel {
  double constant_ms = 0.0;
  /// When non-empty, frame k takes per_frame_ms[k % size] instead.
  std::vector<double> per_frame_ms;

  static LatencyModel constant(double ms) { return {ms, {}}; }
  static LatencyModel per_frame(std::vector<double> ms) { return {0.0, std::move(ms)}; }

  double at(std::int64_t k) const;
  double max_ms() const;
};

struct StreamConfig {
  double frame_interval_ms = 33.33;
  int horizon_frames = 30;
  LatencyModel latency;
  DispatchPolicy dispatch = DispatchPolicy::LatestFrameOnFree;

  void validate() const;
  double arrival_ms(std::int64_t k) const { return static_cast<double>(k) * frame_interval_ms; }
};

struct PredictionRecord {
  std::int64_t source_frame_index = 0;
  double issue_time_ms = 0.0;
  double completion_time_ms = 0.0;
  std::vector<Detection> detections;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

using Detector = std::function<std::vector<Detection>(std::int64_t source_frame)>;

/// Event-driven, deterministic. Records come out sorted by completion time.
std::vector<PredictionRecord> simulate_stream(const StreamConfig& cfg, const Detector& detector);

/// Record with the greatest completion time <= query time, or nullptr.
/// `records` must be sorted by completion time.
const PredictionRecord* latest_completed(std::span<const PredictionRecord> records,
                                         double query_time_ms);

struct EvalPairing {
  std::int64_t query_frame_index = 0;
  double query_time_ms = 0.0;
  std::optional<PredictionRecord> record;  // empty: nothing completed yet
};

/// One pairing per annotated frame, queried at the frame's arrival time.
std::vector<EvalPairing> pair_for_eval(std::span<const PredictionRecord> records,
                                       std::span<const std::int64_t> annotated_frames,
                                       double frame_interval_ms);

/// Line-delimited JSON, one record per line:
/// {"source_frame":..,"issue_ms":..,"completion_ms":..,"detections":[{"bbox":[x0,y0,x1,y1],"category":..,"score":..}]}
void write_record_log(std::ostream& os, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_record_log(std::istream& is);

}  // namespace lsnet
