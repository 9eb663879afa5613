#include "lsnet/streaming.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "lsnet/error.hpp"

namespace lsnet {

using nlohmann::json;

std::string_view to_string(DispatchPolicy p) {
  switch (p) {
    case DispatchPolicy::LatestFrameOnFree: return "latest";
    case DispatchPolicy::DropWhileBusy: return "drop";
    case DispatchPolicy::Fifo: return "fifo";
    case DispatchPolicy::Pipelined: return "pipelined";
  }
  return "?";
}

DispatchPolicy parse_dispatch_policy(std::string_view name) {
  if (name == "latest" || name == "LatestFrameOnFree") return DispatchPolicy::LatestFrameOnFree;
  if (name == "drop" || name == "DropWhileBusy") return DispatchPolicy::DropWhileBusy;
  if (name == "fifo" || name == "Fifo") return DispatchPolicy::Fifo;
  if (name == "pipelined" || name == "Pipelined") return DispatchPolicy::Pipelined;
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown dispatch policy '{}'", name));
}

double LatencyModel::at(std::int64_t k) const {
  if (per_frame_ms.empty()) return constant_ms;
  return per_frame_ms[static_cast<std::size_t>(k) % per_frame_ms.size()];
}

double LatencyModel::max_ms() const {
  if (per_frame_ms.empty()) return constant_ms;
  return *std::max_element(per_frame_ms.begin(), per_frame_ms.end());
}

void StreamConfig::validate() const {
  if (!(frame_interval_ms > 0.0) || !std::isfinite(frame_interval_ms)) {
    throw Error(ErrorCode::InvalidConfig, "frame_interval_ms must be positive");
  }
  if (horizon_frames < 1) throw Error(ErrorCode::InvalidConfig, "horizon_frames must be >= 1");
  auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
  if (bad(latency.constant_ms) || std::any_of(latency.per_frame_ms.begin(),
                                              latency.per_frame_ms.end(), bad)) {
    throw Error(ErrorCode::InvalidConfig, "latencies must be finite and >= 0");
  }
}

std::vector<PredictionRecord> simulate_stream(const StreamConfig& cfg, const Detector& detector) {
  cfg.validate();
  const std::int64_t horizon = cfg.horizon_frames;
  std::vector<PredictionRecord> records;
  if (cfg.dispatch == DispatchPolicy::Pipelined) {
    for (std::int64_t k = 0; k < horizon; ++k) {
      PredictionRecord rec;
      rec.source_frame_index = k;
      rec.issue_time_ms = cfg.arrival_ms(k);
      rec.completion_time_ms = rec.issue_time_ms + cfg.latency.at(k);
      rec.detections = detector(k);
      records.push_back(std::move(rec));
    }
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
      return a.completion_time_ms < b.completion_time_ms;
    });
    return records;
  }
  double free_at = 0.0;
  std::int64_t last = -1;

  while (true) {
    std::int64_t next = last + 1;
    if (next >= horizon) break;
    double start = 0.0;
    switch (cfg.dispatch) {
      case DispatchPolicy::LatestFrameOnFree: {
        std::int64_t newest = last;
        while (newest + 1 < horizon && cfg.arrival_ms(newest + 1) <= free_at + kTimeEpsilonMs) {
          ++newest;
        }
        if (newest > last) {
          next = newest;
          start = free_at;
        } else {
          start = cfg.arrival_ms(next);  // idle until the next arrival
        }
        break;
      }
      case DispatchPolicy::DropWhileBusy:
        while (next < horizon && cfg.arrival_ms(next) < free_at - kTimeEpsilonMs) ++next;
        if (next >= horizon) break;
        start = cfg.arrival_ms(next);
        break;
      case DispatchPolicy::Fifo:
        start = std::max(free_at, cfg.arrival_ms(next));
        break;
      case DispatchPolicy::Pipelined:
        break;
    }
    if (next >= horizon) break;

    PredictionRecord rec;
    rec.source_frame_index = next;
    rec.issue_time_ms = start;
    rec.completion_time_ms = start + cfg.latency.at(next);
    rec.detections = detector(next);
    free_at = rec.completion_time_ms;
    last = next;
    records.push_back(std::move(rec));
  }
  return records;
}

const PredictionRecord* latest_completed(std::span<const PredictionRecord> records,
                                         double query_time_ms) {
  auto it = std::upper_bound(records.begin(), records.end(), query_time_ms + kTimeEpsilonMs,
                             [](double t, const PredictionRecord& r) {
                               return t < r.completion_time_ms;
                             });
  if (it == records.begin()) return nullptr;
  return &*std::prev(it);
}

std::vector<EvalPairing> pair_for_eval(std::span<const PredictionRecord> records,
                                       std::span<const std::int64_t> annotated_frames,
                                       double frame_interval_ms) {
  std::vector<EvalPairing> out;
  out.reserve(annotated_frames.size());
  for (std::int64_t k : annotated_frames) {
    EvalPairing p;
    p.query_frame_index = k;
    p.query_time_ms = static_cast<double>(k) * frame_interval_ms;
    if (const PredictionRecord* r = latest_completed(records, p.query_time_ms)) p.record = *r;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

json detection_json(const Detection& d) {
  return {{"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
          {"category", d.category},
          {"score", d.score}};
}

}  // namespace

void write_record_log(std::ostream& os, std::span<const PredictionRecord> records) {
  for (const auto& r : records) {
    json dets = json::array();
    for (const auto& d : r.detections) dets.push_back(detection_json(d));
    json line = {{"source_frame", r.source_frame_index},
                 {"issue_ms", r.issue_time_ms},
                 {"completion_ms", r.completion_time_ms},
                 {"detections", std::move(dets)}};
    os << line.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_record_log(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PredictionRecord r;
      r.source_frame_index = j.at("source_frame").get<std::int64_t>();
      r.issue_time_ms = j.at("issue_ms").get<double>();
      r.completion_time_ms = j.at("completion_ms").get<double>();
      for (const auto& d : j.at("detections")) {
        const auto& b = d.at("bbox");
        if (!b.is_array() || b.size() != 4) {
          throw Error(ErrorCode::ParseError, fmt::format("line {}: bbox needs 4 numbers", line_no));
        }
        r.detections.push_back({{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                 b[3].get<double>()},
                                d.at("category").get<int>(),
                                d.at("score").get<double>()});
      }
      out.push_back(std::move(r));
    } catch (const json::out_of_range& e) {
      throw Error(ErrorCode::MissingField, fmt::format("record log line {}: {}", line_no, e.what()));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("record log line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

}  // namespace lsnet
