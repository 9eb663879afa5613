#include "lsnet/experiment.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "lsnet/coco_io.hpp"
#include "lsnet/dual_path.hpp"
#include "lsnet/error.hpp"
#include "lsnet/forecast.hpp"

namespace lsnet {

using nlohmann::json;

std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::DelayedTruth: return "delayed_gt";
    case DetectorKind::Hold: return "hold";
    case DetectorKind::ConstVelocity: return "const_velocity";
    case DetectorKind::LongShort: return "long_short";
    case DetectorKind::Network: return "network";
  }
  return "?";
}

DetectorKind parse_detector_kind(std::string_view name) {
  for (auto k : {DetectorKind::DelayedTruth, DetectorKind::Hold, DetectorKind::ConstVelocity,
                 DetectorKind::LongShort, DetectorKind::Network}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown detector '{}'", name));
}

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::TemporalRange: return "temporal";
    case SweepAxis::DilationRatio: return "ratio";
    case SweepAxis::FusionVariant: return "variant";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  for (auto a : {SweepAxis::TemporalRange, SweepAxis::DilationRatio, SweepAxis::FusionVariant}) {
    if (name == to_string(a)) return a;
  }
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown sweep axis '{}'", name));
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("LSNET_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "lsnet_out";
}

// ---- config parsing ---------------------------------------------------------

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", what, e.what()));
  }
}

template <typename T>
T get(const json& obj, const char* key, T fallback, std::string_view path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}.{}: {}", path, key, e.what()));
  }
}

template <typename T>
T require(const json& obj, const char* key, std::string_view path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MissingField, fmt::format("{}.{}", path, key));
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}.{}: {}", path, key, e.what()));
  }
}

void require_object(const json& j, std::string_view path) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, fmt::format("{} must be an object", path));
}

BBox parse_box(const json& j, std::string_view path) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::ParseError, fmt::format("{} must be [x_min, y_min, x_max, y_max]", path));
  }
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", path, e.what()));
  }
}

Vec2 parse_vec(const json& obj, const char* key, std::string_view path) {
  auto it = obj.find(key);
  if (it == obj.end()) return {};
  if (!it->is_array() || it->size() != 2) {
    throw Error(ErrorCode::ParseError, fmt::format("{}.{} must be [x, y]", path, key));
  }
  try {
    return {(*it)[0].get<double>(), (*it)[1].get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}.{}: {}", path, key, e.what()));
  }
}

LsfmConfig lsfm_from(const json& j, std::string_view path) {
  require_object(j, path);
  LsfmConfig cfg;
  cfg.variant = parse_fusion_variant(get<std::string>(j, "variant", std::string(to_string(cfg.variant)), path));
  cfg.n_history = get<int>(j, "n_history", cfg.n_history, path);
  cfg.delta_t = get<int>(j, "delta_t", cfg.delta_t, path);
  cfg.ratio = get<double>(j, "ratio", cfg.ratio, path);
  cfg.residual = get<bool>(j, "residual", cfg.residual, path);
  cfg.d = 2;
  return cfg;
}

SyntheticScene scene_from(const json& j, std::string_view path) {
  require_object(j, path);
  SyntheticScene s;
  s.n_frames = get<int>(j, "n_frames", s.n_frames, path);
  s.frame_interval_ms = get<double>(j, "frame_interval_ms", s.frame_interval_ms, path);
  s.image_width = get<int>(j, "image_width", s.image_width, path);
  s.image_height = get<int>(j, "image_height", s.image_height, path);
  s.jitter_px = get<double>(j, "jitter_px", s.jitter_px, path);
  s.seed = get<std::uint64_t>(j, "seed", s.seed, path);
  auto it = j.find("trajectories");
  if (it == j.end()) throw Error(ErrorCode::MissingField, fmt::format("{}.trajectories", path));
  if (!it->is_array()) throw Error(ErrorCode::ParseError, fmt::format("{}.trajectories must be an array", path));
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string tp = fmt::format("{}.trajectories[{}]", path, i);
    const json& t = (*it)[i];
    require_object(t, tp);
    TrajectorySpec spec;
    spec.kind = parse_motion_kind(require<std::string>(t, "kind", tp));
    auto init = t.find("initial");
    if (init == t.end()) throw Error(ErrorCode::MissingField, tp + ".initial");
    spec.initial = parse_box(*init, tp + ".initial");
    spec.velocity = parse_vec(t, "velocity", tp);
    spec.acceleration = parse_vec(t, "acceleration", tp);
    spec.pivot = parse_vec(t, "pivot", tp);
    spec.turn_rate = get<double>(t, "turn_rate", 0.0, tp);
    spec.category = get<int>(t, "category", spec.category, tp);
    if (auto occ = t.find("occlusion"); occ != t.end() && !occ->is_null()) {
      if (!occ->is_array() || occ->size() != 2) {
        throw Error(ErrorCode::ParseError, fmt::format("{}.occlusion must be [first, last]", tp));
      }
      spec.occlusion = OcclusionWindow{(*occ)[0].get<std::int64_t>(), (*occ)[1].get<std::int64_t>()};
    }
    s.trajectories.push_back(spec);
  }
  validate_scene(s);
  return s;
}

}  // namespace

std::string lsfm_config_to_json(const LsfmConfig& cfg) {
  json j = {{"variant", std::string(to_string(cfg.variant))},
            {"n_history", cfg.n_history},
            {"delta_t", cfg.delta_t},
            {"ratio", cfg.ratio},
            {"residual", cfg.residual}};
  return j.dump();
}

LsfmConfig lsfm_config_from_json(std::string_view json_text) {
  LsfmConfig cfg = lsfm_from(parse_json(json_text, "lsfm config"), "$");
  cfg.validate();
  return cfg;
}

SyntheticScene parse_scene(std::string_view json_text) {
  return scene_from(parse_json(json_text, "scene"), "$");
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json root = parse_json(json_text, "run config");
  require_object(root, "$");
  RunConfig cfg;
  cfg.seed = get<std::uint64_t>(root, "seed", cfg.seed, "$");

  if (auto it = root.find("data"); it != root.end()) {
    require_object(*it, "$.data");
    const int sources = static_cast<int>(it->contains("preset")) +
                        static_cast<int>(it->contains("scene")) +
                        static_cast<int>(it->contains("coco"));
    if (sources != 1) {
      throw Error(ErrorCode::InvalidConfig, "$.data needs exactly one of preset, scene, coco");
    }
    if (it->contains("preset")) {
      cfg.data = preset_scene(require<std::string>(*it, "preset", "$.data"));
    } else if (it->contains("scene")) {
      cfg.data = scene_from((*it)["scene"], "$.data.scene");
    } else {
      std::filesystem::path p = require<std::string>(*it, "coco", "$.data");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.data = p;
    }
  }

  if (auto it = root.find("stream"); it != root.end()) {
    require_object(*it, "$.stream");
    cfg.stream.frame_interval_ms = get<double>(*it, "frame_interval_ms", cfg.stream.frame_interval_ms, "$.stream");
    cfg.stream.latency.constant_ms = get<double>(*it, "latency_ms", 0.0, "$.stream");
    cfg.stream.latency.per_frame_ms =
        get<std::vector<double>>(*it, "latency_per_frame_ms", {}, "$.stream");
    cfg.stream.dispatch = parse_dispatch_policy(
        get<std::string>(*it, "dispatch", std::string(to_string(cfg.stream.dispatch)), "$.stream"));
  }

  if (auto it = root.find("lsfm"); it != root.end()) {
    if (it->is_null()) {
      cfg.lsfm.reset();
    } else {
      require_object(*it, "$.lsfm");
      if (get<int>(*it, "n_history", 1, "$.lsfm") == 0) {
        cfg.lsfm.reset();
      } else {
        cfg.lsfm = lsfm_from(*it, "$.lsfm");
        cfg.lsfm->validate();
      }
    }
  }

  if (auto it = root.find("detector"); it != root.end()) {
    require_object(*it, "$.detector");
    auto& d = cfg.detector;
    d.kind = parse_detector_kind(get<std::string>(*it, "kind", std::string(to_string(d.kind)), "$.detector"));
    d.latency_frames = get<int>(*it, "latency_frames", d.latency_frames, "$.detector");
    if (auto fs = it->find("forecast_steps"); fs != it->end() && !(fs->is_string() && *fs == "auto")) {
      d.forecast_steps = get<int>(*it, "forecast_steps", 0, "$.detector");
    }
    auto ch = get<std::vector<int>>(*it, "channels", {}, "$.detector");
    if (!ch.empty()) {
      if (ch.size() != 3) throw Error(ErrorCode::InvalidConfig, "$.detector.channels needs 3 widths");
      d.network_channels = {ch[0], ch[1], ch[2]};
    }
    d.head_threshold = get<double>(*it, "head_threshold", d.head_threshold, "$.detector");
  }

  if (auto it = root.find("sap"); it != root.end()) {
    require_object(*it, "$.sap");
    if (it->contains("max_dets_per_frame") && !(*it)["max_dets_per_frame"].is_null()) {
      cfg.sap.max_dets_per_frame = get<std::size_t>(*it, "max_dets_per_frame", 100, "$.sap");
    }
  }

  if (auto it = root.find("output_dir"); it != root.end()) {
    std::filesystem::path p = get<std::string>(root, "output_dir", "", "$");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.output_dir = p;
  }
  cfg.stream.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open config {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

// ---- evaluation -------------------------------------------------------------

namespace {

struct NetworkRunner {
  NetworkRunner(const DetectorConfig& d, const std::optional<LsfmConfig>& lsfm, std::uint64_t seed)
      : extractor(d.network_channels),
        head(d.head_threshold),
        net(extractor, head, DualPathConfig{lsfm, seed, PaddingPolicy::ReplicateCurrent}) {}

  BoxFilterExtractor extractor;
  BlobHead head;
  DualPathNet net;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  out << text;
}

}  // namespace

EvalResult run_eval(const RunConfig& cfg) {
  cfg.stream.validate();
  if (cfg.lsfm) cfg.lsfm->validate();

  std::vector<SceneFrame> frames;
  if (const auto* scene = std::get_if<SyntheticScene>(&cfg.data)) {
    SyntheticScene s = *scene;
    s.seed = cfg.seed;
    s.frame_interval_ms = cfg.stream.frame_interval_ms;
    s.render_pixels = cfg.detector.kind == DetectorKind::Network;
    frames = generate_scenario(s);
  } else {
    const auto& path = std::get<std::filesystem::path>(cfg.data);
    if (cfg.detector.kind == DetectorKind::Network) {
      throw Error(ErrorCode::InvalidConfig, "the network detector needs a synthetic scene (pixels)");
    }
    CocoDataset ds = load_coco_annotations(path, cfg.stream.frame_interval_ms);
    for (std::size_t k = 0; k < ds.frames.size(); ++k) {
      frames.push_back({std::move(ds.frames[k]), std::move(ds.truth[k])});
    }
  }
  if (frames.empty()) throw Error(ErrorCode::InvalidConfig, "data source has no frames");

  const TruthStream truth = truth_stream(frames);
  StreamConfig stream = cfg.stream;
  stream.horizon_frames = static_cast<int>(frames.size());

  const int steps = cfg.detector.forecast_steps.value_or(static_cast<int>(
      std::ceil(stream.latency.max_ms() / stream.frame_interval_ms - kTimeEpsilonMs)));

  Detector detector;
  switch (cfg.detector.kind) {
    case DetectorKind::DelayedTruth: {
      const int lat = cfg.detector.latency_frames;
      detector = [&truth, lat](std::int64_t k) { return delayed_gt_detect(truth, lat, k); };
      break;
    }
    case DetectorKind::Hold:
      detector = ForecastDetector{&truth, 0, 1, steps};
      break;
    case DetectorKind::ConstVelocity:
      detector = ForecastDetector{&truth, 1, 1, steps};
      break;
    case DetectorKind::LongShort:
      detector = cfg.lsfm ? ForecastDetector{&truth, cfg.lsfm->n_history, cfg.lsfm->delta_t, steps}
                          : ForecastDetector{&truth, 0, 1, steps};
      break;
    case DetectorKind::Network: {
      auto runner = std::make_shared<NetworkRunner>(cfg.detector, cfg.lsfm, cfg.seed);
      detector = [runner, &frames](std::int64_t k) {
        return runner->net.step(frames[static_cast<std::size_t>(k)].frame).detections;
      };
      break;
    }
  }

  EvalResult result;
  result.records = simulate_stream(stream, detector);
  std::vector<std::int64_t> annotated(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) annotated[k] = frames[k].frame.index;
  result.pairings = pair_for_eval(result.records, annotated, stream.frame_interval_ms);
  result.report = compute_sap_report(result.pairings, truth, cfg.sap);

  if (!cfg.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) {
      throw Error(ErrorCode::IoError,
                  fmt::format("cannot create {}: {}", cfg.output_dir.string(), ec.message()));
    }
    write_text(cfg.output_dir / "report.csv",
               report_csv_header() + "\n" + report_csv_values(result.report) + "\n");
    write_text(cfg.output_dir / "report.txt",
               report_key_values(result.report) + "\n" + report_table(result.report));
    std::ostringstream log;
    write_record_log(log, result.records);
    write_text(cfg.output_dir / "records.jsonl", log.str());
  }
  return result;
}

// ---- sweeps -----------------------------------------------------------------

SweepSpec SweepSpec::defaults(SweepAxis axis, RunConfig base) {
  SweepSpec s;
  s.axis = axis;
  s.base = std::move(base);
  switch (axis) {
    case SweepAxis::TemporalRange:
      s.temporal = {{0, 0}, {1, 1}, {1, 2}, {2, 1}, {2, 2}, {3, 1},
                    {3, 2}, {4, 1}, {4, 2}, {5, 1}, {5, 2}};
      break;
    case SweepAxis::DilationRatio:
      s.ratios = {0.25, 0.5, 0.75};
      break;
    case SweepAxis::FusionVariant:
      s.variants = {{FusionVariant::EfAvg, true},
                    {FusionVariant::EfDil, true},
                    {FusionVariant::LfAvg, true},
                    {FusionVariant::LfDil, true},
                    {FusionVariant::LfDil, false}};
      break;
  }
  return s;
}

std::size_t SweepSpec::row_count() const {
  switch (axis) {
    case SweepAxis::TemporalRange: return temporal.size();
    case SweepAxis::DilationRatio: return ratios.size();
    case SweepAxis::FusionVariant: return variants.size();
  }
  return 0;
}

namespace {

std::string variant_label(const VariantSetting& v) {
  std::string name;
  switch (v.variant) {
    case FusionVariant::EfAvg: name = "LSFM-Ef-Avg"; break;
    case FusionVariant::EfDil: name = "LSFM-Ef-Dil"; break;
    case FusionVariant::LfAvg: name = "LSFM-Lf-Avg"; break;
    case FusionVariant::LfDil: name = "LSFM-Lf-Dil"; break;
  }
  return v.residual ? name : name + "*";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

struct PlannedRun {
  std::vector<std::string> keys;
  RunConfig cfg;
};

std::vector<PlannedRun> plan_runs(const SweepSpec& spec) {
  std::vector<PlannedRun> runs;
  RunConfig base = spec.base;
  base.output_dir.clear();
  auto with_fusion = [&]() {
    RunConfig c = base;
    if (!c.lsfm) c.lsfm = LsfmConfig::defaults(2);
    return c;
  };
  switch (spec.axis) {
    case SweepAxis::TemporalRange:
      for (auto [n, dt] : spec.temporal) {
        RunConfig c = base;
        if (n == 0) {
          c.lsfm.reset();
          runs.push_back({{"0", "-"}, c});
        } else {
          c = with_fusion();
          c.lsfm->n_history = n;
          c.lsfm->delta_t = dt;
          runs.push_back({{std::to_string(n), std::to_string(dt)}, c});
        }
      }
      break;
    case SweepAxis::DilationRatio:
      for (double r : spec.ratios) {
        RunConfig c = with_fusion();
        c.lsfm->ratio = r;
        runs.push_back({{fmt::format("{}", r)}, c});
      }
      break;
    case SweepAxis::FusionVariant:
      for (const auto& v : spec.variants) {
        RunConfig c = with_fusion();
        c.lsfm->variant = v.variant;
        c.lsfm->residual = v.residual;
        runs.push_back({{variant_label(v)}, c});
      }
      break;
  }
  return runs;
}

}  // namespace

SweepTable run_sweep(const SweepSpec& spec) {
  SweepTable table;
  switch (spec.axis) {
    case SweepAxis::TemporalRange: table.key_columns = {"N", "delta_t"}; break;
    case SweepAxis::DilationRatio: table.key_columns = {"ratio"}; break;
    case SweepAxis::FusionVariant: table.key_columns = {"lsfm"}; break;
  }
  const auto runs = plan_runs(spec);
  if (runs.empty()) throw Error(ErrorCode::InvalidConfig, "sweep has no values");

  std::vector<std::future<SapReport>> pending;
  pending.reserve(runs.size());
  for (const auto& run : runs) {
    pending.push_back(std::async(std::launch::async,
                                 [cfg = run.cfg]() { return run_eval(cfg).report; }));
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    SweepRow row;
    row.keys = runs[i].keys;
    try {
      row.report = pending[i].get();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string SweepTable::to_csv() const {
  std::string out;
  for (const auto& k : key_columns) out += k + ",";
  out += report_csv_header() + ",status\n";
  for (const auto& row : rows) {
    for (const auto& k : row.keys) out += csv_field(k) + ",";
    out += report_csv_values(row.report.value_or(SapReport{}));
    out += "," + (row.error.empty() ? std::string("ok") : csv_field("error: " + row.error)) + "\n";
  }
  return out;
}

}  // namespace lsnet
