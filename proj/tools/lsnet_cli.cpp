// lsnet_cli: eval, sweep, gen-scene and export-report over the lsnet library.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "lsnet/coco_io.hpp"
#include "lsnet/error.hpp"
#include "lsnet/experiment.hpp"

namespace fs = std::filesystem;
using namespace lsnet;

namespace {

struct RunOverrides {
  std::string config;
  std::string preset;
  std::string scene_file;
  std::string coco;
  std::optional<std::uint64_t> seed;
  std::optional<double> interval_ms;
  std::optional<double> latency_ms;
  std::string dispatch;
  std::string detector;
  std::optional<int> latency_frames;
  std::optional<int> forecast_steps;
  std::string variant;
  std::optional<int> n_history;
  std::optional<int> delta_t;
  std::optional<double> ratio;
  bool no_residual = false;
  std::string out;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", p.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", p.string()));
  out << text;
}

void add_run_options(CLI::App* cmd, RunOverrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON run config");
  cmd->add_option("--preset", o.preset, "built-in scene preset");
  cmd->add_option("--scene", o.scene_file, "JSON scene file");
  cmd->add_option("--coco", o.coco, "COCO annotation file");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--interval-ms", o.interval_ms, "frame interval");
  cmd->add_option("--latency-ms", o.latency_ms, "constant detector latency");
  cmd->add_option("--dispatch", o.dispatch, "latest | drop | fifo | pipelined");
  cmd->add_option("--detector", o.detector,
                  "delayed_gt | hold | const_velocity | long_short | network");
  cmd->add_option("--latency-frames", o.latency_frames, "delay for delayed_gt");
  cmd->add_option("--forecast-steps", o.forecast_steps, "frames to forecast ahead");
  cmd->add_option("--variant", o.variant, "EfAvg | EfDil | LfAvg | LfDil");
  cmd->add_option("--n-history", o.n_history, "history frames, 0 disables");
  cmd->add_option("--delta-t", o.delta_t, "history stride");
  cmd->add_option("--ratio", o.ratio, "short-path channel ratio");
  cmd->add_flag("--no-residual", o.no_residual, "drop the residual connection");
  cmd->add_option("-o,--out", o.out, "output directory");
}

RunConfig build_run_config(const RunOverrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  const int sources = int(!o.preset.empty()) + int(!o.scene_file.empty()) + int(!o.coco.empty());
  if (sources > 1) throw Error(ErrorCode::InvalidConfig, "give at most one of --preset, --scene, --coco");
  if (!o.preset.empty()) cfg.data = preset_scene(o.preset);
  if (!o.scene_file.empty()) cfg.data = parse_scene(read_file(o.scene_file));
  if (!o.coco.empty()) cfg.data = fs::path(o.coco);
  if (o.seed) cfg.seed = *o.seed;
  if (o.interval_ms) cfg.stream.frame_interval_ms = *o.interval_ms;
  if (o.latency_ms) {
    cfg.stream.latency.constant_ms = *o.latency_ms;
    cfg.stream.latency.per_frame_ms.clear();
  }
  if (!o.dispatch.empty()) cfg.stream.dispatch = parse_dispatch_policy(o.dispatch);
  if (!o.detector.empty()) cfg.detector.kind = parse_detector_kind(o.detector);
  if (o.latency_frames) cfg.detector.latency_frames = *o.latency_frames;
  if (o.forecast_steps) cfg.detector.forecast_steps = *o.forecast_steps;

  const bool touches_fusion = !o.variant.empty() || o.n_history || o.delta_t || o.ratio || o.no_residual;
  if (o.n_history && *o.n_history == 0) {
    cfg.lsfm.reset();
  } else if (touches_fusion) {
    if (!cfg.lsfm) cfg.lsfm = LsfmConfig::defaults(2);
    if (!o.variant.empty()) cfg.lsfm->variant = parse_fusion_variant(o.variant);
    if (o.n_history) cfg.lsfm->n_history = *o.n_history;
    if (o.delta_t) cfg.lsfm->delta_t = *o.delta_t;
    if (o.ratio) cfg.lsfm->ratio = *o.ratio;
    if (o.no_residual) cfg.lsfm->residual = false;
    cfg.lsfm->validate();
  }
  if (!o.out.empty()) {
    cfg.output_dir = o.out;
  } else if (cfg.output_dir.empty()) {
    cfg.output_dir = default_output_dir();
  }
  cfg.stream.validate();
  return cfg;
}

int cmd_eval(const RunOverrides& o) {
  const RunConfig cfg = build_run_config(o);
  const EvalResult r = run_eval(cfg);
  std::cout << report_table(r.report);
  std::cout << fmt::format("wrote {}\n", cfg.output_dir.string());
  return 0;
}

int cmd_sweep(const RunOverrides& o, const std::string& axis_name) {
  RunConfig base = build_run_config(o);
  const fs::path out_dir = base.output_dir;
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const SweepSpec spec = SweepSpec::defaults(axis, base);
  const SweepTable table = run_sweep(spec);
  const std::string csv = table.to_csv();
  const fs::path out = out_dir / fmt::format("sweep_{}.csv", to_string(axis));
  write_file(out, csv);
  std::cout << csv;
  std::cout << fmt::format("wrote {}\n", out.string());
  int failed = 0;
  for (const auto& row : table.rows) failed += row.error.empty() ? 0 : 1;
  if (failed > 0) std::cerr << fmt::format("{} of {} runs failed\n", failed, table.rows.size());
  return 0;
}

int cmd_gen_scene(const std::string& preset, const std::string& scene_file,
                  std::optional<std::uint64_t> seed, std::optional<int> frames, std::string out) {
  SyntheticScene scene = scene_file.empty() ? preset_scene(preset) : parse_scene(read_file(scene_file));
  if (seed) scene.seed = *seed;
  if (frames) scene.n_frames = *frames;
  if (out.empty()) out = (default_output_dir() / "scene.json").string();
  const auto scene_frames = generate_scenario(scene);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_coco_annotations(out, scene_frames, scene.image_width, scene.image_height);
  std::size_t boxes = 0;
  for (const auto& f : scene_frames) boxes += f.truth.size();
  std::cout << fmt::format("wrote {} ({} frames, {} boxes)\n", out, scene_frames.size(), boxes);
  return 0;
}

int cmd_export_report(const std::string& annotations, const std::string& records_path,
                      double interval_ms, std::optional<std::size_t> max_dets, std::string out) {
  const CocoDataset ds = load_coco_annotations(annotations, interval_ms);
  std::ifstream in(records_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", records_path));
  const auto records = read_record_log(in);
  std::vector<std::int64_t> annotated;
  for (const auto& f : ds.frames) annotated.push_back(f.index);
  const auto pairings = pair_for_eval(records, annotated, interval_ms);
  SapOptions opts;
  if (max_dets) opts.max_dets_per_frame = *max_dets;
  const SapReport report = compute_sap_report(pairings, ds.truth, opts);
  if (out.empty()) out = default_output_dir().string();
  const fs::path dir(out);
  write_file(dir / "report.csv", report_csv_header() + "\n" + report_csv_values(report) + "\n");
  write_file(dir / "report.txt", report_key_values(report) + "\n" + report_table(report));
  std::cout << report_table(report);
  std::cout << fmt::format("wrote {}\n", dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming detection evaluation with long/short temporal fusion"};
  app.require_subcommand(1);

  RunOverrides eval_opts;
  auto* eval = app.add_subcommand("eval", "run one configuration and write sAP reports");
  add_run_options(eval, eval_opts);

  RunOverrides sweep_opts;
  std::string axis = "temporal";
  auto* sweep = app.add_subcommand("sweep", "ablation sweep over one axis");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "temporal | ratio | variant");

  std::string gen_preset = "uniform";
  std::string gen_scene_file;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_frames;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-scene", "export a synthetic scene as COCO annotations");
  gen->add_option("--preset", gen_preset, "built-in scene preset");
  gen->add_option("--scene", gen_scene_file, "JSON scene file");
  gen->add_option("--seed", gen_seed, "scene seed");
  gen->add_option("--frames", gen_frames, "frame count");
  gen->add_option("-o,--out", gen_out, "output annotation file");

  std::string exp_ann;
  std::string exp_records;
  double exp_interval = 33.33;
  std::optional<std::uint64_t> exp_seed;
  std::optional<std::size_t> exp_max_dets;
  std::string exp_out;
  auto* exp = app.add_subcommand("export-report", "score a recorded prediction log");
  exp->add_option("--annotations", exp_ann, "COCO annotation file")->required();
  exp->add_option("--records", exp_records, "records.jsonl from eval")->required();
  exp->add_option("--interval-ms", exp_interval, "frame interval");
  exp->add_option("--seed", exp_seed, "accepted for uniformity; scoring is deterministic");
  exp->add_option("--max-dets", exp_max_dets, "detections kept per frame");
  exp->add_option("-o,--out", exp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) return cmd_eval(eval_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, axis);
    if (gen->parsed()) return cmd_gen_scene(gen_preset, gen_scene_file, gen_seed, gen_frames, gen_out);
    if (exp->parsed()) return cmd_export_report(exp_ann, exp_records, exp_interval, exp_max_dets, exp_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
