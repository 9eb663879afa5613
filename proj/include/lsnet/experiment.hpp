#pragma once

// End-to-end runs: data (synthetic scene or COCO file) -> simulated stream ->
// latency pairing -> sAP report, plus ablation sweeps over temporal range,
// dilation ratio and fusion variant.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lsnet/lsfm.hpp"
#include "lsnet/sap.hpp"
#include "lsnet/scene.hpp"
#include "lsnet/streaming.hpp"

namespace lsnet {

enum class DetectorKind {
  DelayedTruth,   // ground truth of frame k - latency_frames
  Hold,           // current box, no motion model
  ConstVelocity,  // two-frame extrapolation
  LongShort,      // least-squares fit over the configured temporal range
  Network,        // dual-path network over rendered frames
};

std::string_view to_string(DetectorKind k);
DetectorKind parse_detector_kind(std::string_view name);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::LongShort;
  int latency_frames = 0;  // DelayedTruth only
  /// Frames to forecast ahead; empty means ceil(max latency / interval).
  std::optional<int> forecast_steps;
  std::array<int, 3> network_channels{16, 32, 64};
  double head_threshold = 0.25;
};

struct RunConfig {
  std::variant<SyntheticScene, std::filesystem::path> data = preset_scene("uniform");
  StreamConfig stream;  // horizon is taken from the data
  /// Temporal fusion settings (d is set per pyramid level). Empty disables
  /// history: forecasters hold the current box and the network passes
  /// current features straight to the head.
  std::optional<LsfmConfig> lsfm = LsfmConfig::defaults(2);
  DetectorConfig detector;
  std::uint64_t seed = 7;
  SapOptions sap;
  /// When non-empty, run_eval writes report.csv, report.txt and records.jsonl.
  std::filesystem::path output_dir;
};

/// Parses the JSON config schema (see README). Relative dataset paths are
/// resolved against `base_dir`. Throws ParseError / MissingField /
/// InvalidConfig.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::string lsfm_config_to_json(const LsfmConfig& cfg);
/// Keys: variant, n_history, delta_t, ratio, residual (all optional, defaults
/// from LsfmConfig). d is not part of the file format.
LsfmConfig lsfm_config_from_json(std::string_view json_text);

SyntheticScene parse_scene(std::string_view json_text);

struct EvalResult {
  SapReport report;
  std::vector<PredictionRecord> records;
  std::vector<EvalPairing> pairings;
};

EvalResult run_eval(const RunConfig& cfg);

enum class SweepAxis { TemporalRange, DilationRatio, FusionVariant };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view name);

struct VariantSetting {
  FusionVariant variant = FusionVariant::LfDil;
  bool residual = true;
  friend bool operator==(const VariantSetting&, const VariantSetting&) = default;
};

struct SweepSpec {
  SweepAxis axis = SweepAxis::TemporalRange;
  /// (N, dt) pairs; N == 0 disables history.
  std::vector<std::pair<int, int>> temporal;
  std::vector<double> ratios;
  std::vector<VariantSetting> variants;
  RunConfig base;

  /// Standard ablation rows: eleven (N, dt) pairs from (0,-) to
  /// (5,2), ratios {0.25, 0.5, 0.75}, and the four variants plus dilated
  /// late fusion without residual.
  static SweepSpec defaults(SweepAxis axis, RunConfig base);
  std::size_t row_count() const;
};

struct SweepRow {
  std::vector<std::string> keys;
  std::optional<SapReport> report;
  std::string error;  // empty on success
};

struct SweepTable {
  std::vector<std::string> key_columns;
  std::vector<SweepRow> rows;

  std::string to_csv() const;
};

/// One run per value, in spec order; runs execute concurrently. A failing
/// run is recorded in its row and the sweep continues.
SweepTable run_sweep(const SweepSpec& spec);

/// Default output directory: $LSNET_OUT_DIR, else "lsnet_out".
std::filesystem::path default_output_dir();

}  // namespace lsnet
