#include "lsnet/lsfm.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "lsnet/error.hpp"

namespace lsnet {

std::string_view to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::EfAvg: return "EfAvg";
    case FusionVariant::EfDil: return "EfDil";
    case FusionVariant::LfAvg: return "LfAvg";
    case FusionVariant::LfDil: return "LfDil";
  }
  return "?";
}

FusionVariant parse_fusion_variant(std::string_view name) {
  if (name == "EfAvg" || name == "LSFM-Ef-Avg") return FusionVariant::EfAvg;
  if (name == "EfDil" || name == "LSFM-Ef-Dil") return FusionVariant::EfDil;
  if (name == "LfAvg" || name == "LSFM-Lf-Avg") return FusionVariant::LfAvg;
  if (name == "LfDil" || name == "LSFM-Lf-Dil") return FusionVariant::LfDil;
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown fusion variant '{}'", name));
}

LsfmConfig LsfmConfig::defaults(int d) {
  LsfmConfig cfg;
  cfg.d = d;
  return cfg;
}

void LsfmConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("ratio must lie in (0,1), got {}", ratio));
  }
  if (n_history < 1) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("n_history must be >= 1, got {}", n_history));
  }
  if (delta_t < 1) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("delta_t must be >= 1, got {}", delta_t));
  }
  if (d < 2) throw Error(ErrorCode::InvalidConfig, fmt::format("d must be >= 2, got {}", d));
}

namespace {

// Slack so that products like 0.3 * 10 floor to 3 rather than 2.
constexpr double kFloorSlack = 1e-9;

int floor_int(double x) { return static_cast<int>(std::floor(x + kFloorSlack)); }

}  // namespace

ChannelPlan plan_channels(const LsfmConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  const int n = cfg.n_history;
  ChannelPlan plan;
  switch (cfg.variant) {
    case FusionVariant::EfAvg:
      plan.short_out = plan.long_out = plan.pre_projection_total = d;
      break;
    case FusionVariant::EfDil:
      plan.short_out = plan.long_out = d / 2;
      plan.pre_projection_total = 2 * (d / 2);
      break;
    case FusionVariant::LfAvg:
      plan.short_out = plan.long_out = d / (1 + n);
      plan.pre_projection_total = (1 + n) * plan.short_out;
      break;
    case FusionVariant::LfDil: {
      plan.short_out = floor_int(cfg.ratio * d);
      plan.long_out = floor_int((1.0 - cfg.ratio) * d / n);
      if (plan.short_out + n * plan.long_out > d) {
        plan.short_out = static_cast<int>(std::floor(cfg.ratio * d));
        plan.long_out = static_cast<int>(std::floor((1.0 - cfg.ratio) * d / n));
      }
      plan.pre_projection_total = plan.short_out + n * plan.long_out;
      break;
    }
  }
  if (plan.pre_projection_total > d) {
    throw std::logic_error(fmt::format("channel plan overflows d={} (total {})", d,
                                       plan.pre_projection_total));
  }
  plan.needs_output_projection = plan.pre_projection_total != d;
  return plan;
}

namespace {

// Portable uniform draw: mt19937_64 output is fully specified by the
// standard, std::uniform_real_distribution is not.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

ProjectionWeights make_projection(int out, int in, std::uint64_t seed, std::mt19937_64& rng) {
  ProjectionWeights w(out, in);
  if (seed == 0) return w;
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& m : w.matrix) m = uniform(rng, -limit, limit);
  for (double& b : w.bias) b = uniform(rng, -0.1, 0.1);
  return w;
}

const ProjectionWeights& require(const std::optional<ProjectionWeights>& w, const char* name) {
  if (!w) throw Error(ErrorCode::InvalidConfig, fmt::format("fusion weights lack {}", name));
  return *w;
}

void check_inputs(const LsfmConfig& cfg, const FeatureMap& current,
                  std::span<const FeatureMap> history) {
  if (static_cast<int>(history.size()) != cfg.n_history) {
    throw Error(ErrorCode::HistoryLengthMismatch,
                fmt::format("expected {} history maps, got {}", cfg.n_history, history.size()));
  }
  if (current.channels() != cfg.d) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("current map has {} channels, config d={}", current.channels(), cfg.d));
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].shape() != current.shape()) {
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("history map {} is {}x{}x{}, current is {}x{}x{}", i,
                              history[i].channels(), history[i].height(), history[i].width(),
                              current.channels(), current.height(), current.width()));
    }
  }
}

}  // namespace

LsfmWeights init_weights(const LsfmConfig& cfg, const ChannelPlan& plan, std::uint64_t seed) {
  cfg.validate();
  LsfmWeights w;
  if (cfg.variant == FusionVariant::EfAvg) return w;
  if (plan.pre_projection_total == 0) {
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("{} with d={} N={} leaves every fusion branch empty",
                            to_string(cfg.variant), cfg.d, cfg.n_history));
  }
  std::mt19937_64 rng(seed);
  if (cfg.variant == FusionVariant::LfAvg) {
    w.avg_proj = make_projection(plan.short_out, cfg.d, seed, rng);
  } else {
    if (plan.short_out > 0) w.short_proj = make_projection(plan.short_out, cfg.d, seed, rng);
    if (plan.long_out > 0) w.long_proj = make_projection(plan.long_out, cfg.d, seed, rng);
  }
  if (plan.needs_output_projection) {
    w.output_proj = make_projection(cfg.d, plan.pre_projection_total, seed, rng);
  }
  return w;
}

FeatureMap fuse(const LsfmConfig& cfg, const LsfmWeights& w, const FeatureMap& current,
                std::span<const FeatureMap> history) {
  cfg.validate();
  check_inputs(cfg, current, history);

  if (cfg.variant == FusionVariant::EfAvg) {
    std::vector<FeatureMap> all;
    all.reserve(history.size() + 1);
    all.push_back(current);
    all.insert(all.end(), history.begin(), history.end());
    return sum_maps(all);
  }

  std::vector<FeatureMap> parts;
  switch (cfg.variant) {
    case FusionVariant::EfDil: {
      if (w.short_proj) parts.push_back(project_1x1(current, *w.short_proj));
      if (w.long_proj) {
        std::vector<FeatureMap> projected;
        projected.reserve(history.size());
        for (const auto& h : history) projected.push_back(project_1x1(h, *w.long_proj));
        parts.push_back(sum_maps(projected));
      }
      break;
    }
    case FusionVariant::LfAvg: {
      const auto& g = require(w.avg_proj, "avg_proj");
      parts.push_back(project_1x1(current, g));
      for (const auto& h : history) parts.push_back(project_1x1(h, g));
      break;
    }
    case FusionVariant::LfDil: {
      if (w.short_proj) parts.push_back(project_1x1(current, *w.short_proj));
      if (w.long_proj) {
        for (const auto& h : history) parts.push_back(project_1x1(h, *w.long_proj));
      }
      break;
    }
    case FusionVariant::EfAvg: break;
  }
  if (parts.empty()) {
    throw Error(ErrorCode::InvalidConfig, "fusion weights provide no branch projections");
  }

  FeatureMap fused = concat_channels(parts);
  if (fused.channels() != cfg.d) {
    fused = project_1x1(fused, require(w.output_proj, "output_proj"));
  }
  return cfg.residual ? add_elementwise(fused, current) : fused;
}

std::uint64_t count_fusion_flops(const LsfmConfig& cfg, const ChannelPlan& plan, int height,
                                 int width) {
  using u64 = std::uint64_t;
  const u64 sites = static_cast<u64>(height) * static_cast<u64>(width);
  const u64 d = static_cast<u64>(cfg.d);
  const u64 n = static_cast<u64>(cfg.n_history);
  const u64 short_out = static_cast<u64>(plan.short_out);
  const u64 long_out = static_cast<u64>(plan.long_out);

  if (cfg.variant == FusionVariant::EfAvg) return n * d * sites;

  u64 macs = 0;
  u64 adds = 0;  // elements touched by elementwise additions
  switch (cfg.variant) {
    case FusionVariant::EfDil:
      macs = d * short_out + n * d * long_out;
      adds = (long_out > 0 ? (n - 1) * long_out : 0);
      break;
    case FusionVariant::LfAvg:
      macs = (n + 1) * d * short_out;
      break;
    case FusionVariant::LfDil:
      macs = d * short_out + n * d * long_out;
      break;
    case FusionVariant::EfAvg: break;
  }
  if (plan.needs_output_projection) macs += static_cast<u64>(plan.pre_projection_total) * d;
  if (cfg.residual) adds += d;
  return 2 * macs * sites + adds * sites;
}

}  // namespace lsnet
