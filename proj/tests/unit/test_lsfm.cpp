#include <gtest/gtest.h>

#include <random>

#include "lsnet/error.hpp"
#include "lsnet/lsfm.hpp"
#include "support/oracles.hpp"

using namespace lsnet;

namespace {

LsfmConfig make(FusionVariant v, int d, int n = 3, double ratio = 0.5, bool residual = true) {
  LsfmConfig c;
  c.variant = v;
  c.d = d;
  c.n_history = n;
  c.ratio = ratio;
  c.residual = residual;
  return c;
}

constexpr FusionVariant kAll[] = {FusionVariant::EfAvg, FusionVariant::EfDil, FusionVariant::LfAvg,
                                  FusionVariant::LfDil};

std::vector<FeatureMap> random_history(std::mt19937_64& rng, int n, int d, int h, int w) {
  std::vector<FeatureMap> out;
  for (int i = 0; i < n; ++i) out.push_back(oracle::random_map(rng, d, h, w));
  return out;
}

}  // namespace

TEST(LsfmConfig, DefaultsAndValidation) {
  const auto c = LsfmConfig::defaults(64);
  EXPECT_EQ(c.variant, FusionVariant::LfDil);
  EXPECT_EQ(c.n_history, 3);
  EXPECT_EQ(c.delta_t, 1);
  EXPECT_EQ(c.ratio, 0.5);
  EXPECT_TRUE(c.residual);
  for (double r : {0.0, 1.0, -0.1, 1.5}) {
    auto bad = c;
    bad.ratio = r;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(plan_channels(bad), Error);
  }
  auto bad = c;
  bad.n_history = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.d = 1;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(FusionVariantNames, ParseBothForms) {
  EXPECT_EQ(parse_fusion_variant("LSFM-Lf-Dil"), FusionVariant::LfDil);
  EXPECT_EQ(parse_fusion_variant("EfAvg"), FusionVariant::EfAvg);
  for (auto v : kAll) EXPECT_EQ(parse_fusion_variant(to_string(v)), v);
  EXPECT_THROW(parse_fusion_variant("LfMax"), Error);
}

// Reference widths for the S, M and L models at /8, /16, /32.
TEST(PlanChannels, ReferenceWidthTable) {
  struct Row {
    int d, short_out, long_out;
  };
  const Row rows[] = {{128, 64, 21},  {256, 128, 42}, {512, 256, 85},   {192, 96, 32},
                      {384, 192, 64}, {768, 384, 128}, {256, 128, 42}, {512, 256, 85},
                      {1024, 512, 170}};
  for (const auto& r : rows) {
    const auto p = plan_channels(make(FusionVariant::LfDil, r.d));
    EXPECT_EQ(p.short_out, r.short_out) << "d=" << r.d;
    EXPECT_EQ(p.long_out, r.long_out) << "d=" << r.d;
  }
}

TEST(PlanChannels, NamedExamples) {
  auto p = plan_channels(make(FusionVariant::LfDil, 1024));
  EXPECT_EQ(p, (ChannelPlan{512, 170, 1022, true}));
  p = plan_channels(make(FusionVariant::LfDil, 384));
  EXPECT_EQ(p, (ChannelPlan{192, 64, 384, false}));
  p = plan_channels(make(FusionVariant::LfAvg, 256));
  EXPECT_EQ(p, (ChannelPlan{64, 64, 256, false}));
  p = plan_channels(make(FusionVariant::EfDil, 7));
  EXPECT_EQ(p, (ChannelPlan{3, 3, 6, true}));
  p = plan_channels(make(FusionVariant::EfAvg, 7));
  EXPECT_EQ(p, (ChannelPlan{7, 7, 7, false}));
}

TEST(PlanChannels, TwoFrameConfigurationSplitsInHalf) {
  for (int d : {2, 7, 128, 1024}) {
    const auto p = plan_channels(make(FusionVariant::LfDil, d, 1));
    EXPECT_EQ(p.short_out, d / 2);
    EXPECT_EQ(p.long_out, d / 2);
  }
}

TEST(PlanChannels, TotalNeverExceedsDExhaustive) {
  for (auto v : kAll) {
    for (int n = 1; n <= 8; ++n) {
      for (double r : {0.25, 0.5, 0.75}) {
        for (int d = 2; d <= 4096; ++d) {
          const auto p = plan_channels(make(v, d, n, r));
          ASSERT_LE(p.pre_projection_total, d) << to_string(v) << " d=" << d << " n=" << n;
          ASSERT_EQ(p.needs_output_projection, p.pre_projection_total != d);
          if (v == FusionVariant::LfDil && r == 0.5) {
            const auto o = oracle::half_ratio_lfdil(d, n);
            ASSERT_EQ(p.short_out, o.short_out);
            ASSERT_EQ(p.long_out, o.long_out);
          }
        }
      }
    }
  }
}

TEST(PlanChannels, GeneralRatioFloors) {
  auto p = plan_channels(make(FusionVariant::LfDil, 128, 3, 0.25));
  EXPECT_EQ(p.short_out, 32);
  EXPECT_EQ(p.long_out, 32);
  p = plan_channels(make(FusionVariant::LfDil, 128, 3, 0.75));
  EXPECT_EQ(p.short_out, 96);
  EXPECT_EQ(p.long_out, 10);
  // 0.3 * 10 is 2.9999999999999996 in binary; the width must still be 3.
  p = plan_channels(make(FusionVariant::LfDil, 10, 1, 0.3));
  EXPECT_EQ(p.short_out, 3);
  EXPECT_EQ(p.long_out, 7);
}

TEST(InitWeights, SeedZeroIsAllZero) {
  const auto cfg = make(FusionVariant::LfDil, 128);
  const auto w = init_weights(cfg, plan_channels(cfg), 0);
  for (const auto* p : {&w.short_proj, &w.long_proj, &w.output_proj}) {
    ASSERT_TRUE(p->has_value());
    for (double v : (*p)->matrix) EXPECT_EQ(v, 0.0);
    for (double v : (*p)->bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(InitWeights, DeterministicPerSeed) {
  const auto cfg = make(FusionVariant::LfDil, 64);
  const auto plan = plan_channels(cfg);
  const auto a = init_weights(cfg, plan, 7);
  const auto b = init_weights(cfg, plan, 7);
  const auto c = init_weights(cfg, plan, 8);
  EXPECT_EQ(a.short_proj, b.short_proj);
  EXPECT_EQ(a.long_proj, b.long_proj);
  EXPECT_EQ(a.output_proj, b.output_proj);
  EXPECT_NE(a.short_proj, c.short_proj);
}

TEST(InitWeights, ShapesFollowPlan) {
  const auto cfg = make(FusionVariant::LfDil, 128);
  const auto w = init_weights(cfg, plan_channels(cfg), 7);
  ASSERT_TRUE(w.short_proj && w.long_proj && w.output_proj);
  EXPECT_EQ(w.short_proj->out_channels, 64);
  EXPECT_EQ(w.short_proj->in_channels, 128);
  EXPECT_EQ(w.long_proj->out_channels, 21);
  EXPECT_EQ(w.long_proj->in_channels, 128);
  EXPECT_EQ(w.output_proj->out_channels, 128);
  EXPECT_EQ(w.output_proj->in_channels, 127);
  EXPECT_FALSE(w.avg_proj);
}

TEST(InitWeights, PresencePatternPerVariant) {
  for (auto v : kAll) {
    for (int d : {8, 9, 16}) {
      const auto cfg = make(v, d);
      const auto plan = plan_channels(cfg);
      const auto w = init_weights(cfg, plan, 3);
      const bool ef_avg = v == FusionVariant::EfAvg;
      const bool dil = v == FusionVariant::EfDil || v == FusionVariant::LfDil;
      EXPECT_EQ(w.short_proj.has_value(), dil);
      EXPECT_EQ(w.long_proj.has_value(), dil);
      EXPECT_EQ(w.avg_proj.has_value(), v == FusionVariant::LfAvg);
      EXPECT_EQ(w.output_proj.has_value(), !ef_avg && plan.needs_output_projection);
    }
  }
}

TEST(InitWeights, EmptyBranchesRejected) {
  const auto cfg = make(FusionVariant::LfAvg, 2, 3);
  try {
    init_weights(cfg, plan_channels(cfg), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  // A zero-width long branch is dropped; the short branch still carries it.
  const auto narrow = make(FusionVariant::LfDil, 4, 3);
  const auto w = init_weights(narrow, plan_channels(narrow), 1);
  EXPECT_TRUE(w.short_proj);
  EXPECT_FALSE(w.long_proj);
  std::mt19937_64 rng(1);
  const auto cur = oracle::random_map(rng, 4, 2, 2);
  const auto hist = random_history(rng, 3, 4, 2, 2);
  const auto out = fuse(narrow, w, cur, hist);
  EXPECT_LE(oracle::max_rel_diff(out.values(), oracle::fuse(narrow, w, cur, hist)), 1e-12);
}

TEST(Fuse, EarlyAverageConstantSum) {
  const auto cfg = make(FusionVariant::EfAvg, 4);
  const Shape s{4, 2, 2};
  const std::vector<FeatureMap> hist{FeatureMap(s, 1.0), FeatureMap(s, 2.0), FeatureMap(s, 3.0)};
  const auto w = init_weights(cfg, plan_channels(cfg), 5);
  EXPECT_EQ(fuse(cfg, w, FeatureMap(s, 4.0), hist), FeatureMap(s, 10.0));
  auto no_res = cfg;
  no_res.residual = false;
  EXPECT_EQ(fuse(no_res, w, FeatureMap(s, 4.0), hist), FeatureMap(s, 10.0));
}

TEST(Fuse, ZeroWeightsResidualIdentity) {
  std::mt19937_64 rng(21);
  for (auto v : {FusionVariant::LfDil, FusionVariant::LfAvg, FusionVariant::EfDil}) {
    for (int d : {8, 16, 13}) {
      const auto cfg = make(v, d);
      const auto w = init_weights(cfg, plan_channels(cfg), 0);
      const auto cur = oracle::random_map(rng, d, 3, 2);
      const auto hist = random_history(rng, 3, d, 3, 2);
      EXPECT_EQ(fuse(cfg, w, cur, hist), cur);
      auto off = cfg;
      off.residual = false;
      EXPECT_EQ(fuse(off, w, cur, hist), FeatureMap(cur.shape()));
    }
  }
}

TEST(Fuse, DilatedLateMatchesNaiveOracle) {
  std::mt19937_64 rng(77);
  const auto cfg = make(FusionVariant::LfDil, 8);
  const auto w = init_weights(cfg, plan_channels(cfg), 7);
  const auto cur = oracle::random_map(rng, 8, 2, 2);
  const auto hist = random_history(rng, 3, 8, 2, 2);
  const auto out = fuse(cfg, w, cur, hist);
  EXPECT_LE(oracle::max_rel_diff(out.values(), oracle::fuse(cfg, w, cur, hist)), 1e-6);
}

TEST(Fuse, RandomConfigsKeepShapeAndMatchOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_dist(1, 5);
  std::uniform_int_distribution<int> hw(1, 4);
  const double ratios[] = {0.25, 0.5, 0.75};
  for (int trial = 0; trial < 120; ++trial) {
    const auto v = kAll[trial % 4];
    const int d = (trial / 4) % 3 == 0 ? 8 : ((trial / 4) % 3 == 1 ? 16 : 11);
    auto cfg = make(v, d, n_dist(rng), ratios[trial % 3], trial % 5 != 0);
    const auto plan = plan_channels(cfg);
    if (v != FusionVariant::EfAvg && plan.pre_projection_total == 0) continue;
    const auto w = init_weights(cfg, plan, 100 + static_cast<std::uint64_t>(trial));
    const int h = hw(rng);
    const int wd = hw(rng);
    const auto cur = oracle::random_map(rng, d, h, wd);
    const auto hist = random_history(rng, cfg.n_history, d, h, wd);
    const auto out = fuse(cfg, w, cur, hist);
    ASSERT_EQ(out.shape(), cur.shape());
    ASSERT_LE(oracle::max_rel_diff(out.values(), oracle::fuse(cfg, w, cur, hist)), 1e-6);
  }
}

TEST(Fuse, HistoryOrderSensitivity) {
  std::mt19937_64 rng(5);
  for (auto v : kAll) {
    const auto cfg = make(v, 16);
    const auto w = init_weights(cfg, plan_channels(cfg), 9);
    const auto cur = oracle::random_map(rng, 16, 2, 2);
    auto hist = random_history(rng, 3, 16, 2, 2);
    const auto before = fuse(cfg, w, cur, hist);
    std::swap(hist[0], hist[2]);
    const auto after = fuse(cfg, w, cur, hist);
    if (v == FusionVariant::LfDil || v == FusionVariant::LfAvg) {
      EXPECT_NE(before, after) << to_string(v);
    } else {
      EXPECT_LE(oracle::max_rel_diff(before.values(), after.values()), 1e-12) << to_string(v);
    }
  }
}

TEST(Fuse, InputErrors) {
  const auto cfg = make(FusionVariant::LfDil, 8);
  const auto w = init_weights(cfg, plan_channels(cfg), 1);
  const FeatureMap cur({8, 2, 2});
  std::vector<FeatureMap> two(2, cur);
  try {
    fuse(cfg, w, cur, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HistoryLengthMismatch);
  }
  std::vector<FeatureMap> bad{cur, cur, FeatureMap({8, 2, 3})};
  try {
    fuse(cfg, w, cur, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(FusionFlops, EarlyAverageHandCount) {
  const auto cfg = make(FusionVariant::EfAvg, 4);
  EXPECT_EQ(count_fusion_flops(cfg, plan_channels(cfg), 1, 1), 12u);
}

TEST(FusionFlops, DilatedLateExpandedFormula) {
  const auto cfg = make(FusionVariant::LfDil, 128);
  const std::uint64_t expected = 2 * (128 * 64 + 3 * 128 * 21 + 127 * 128) + 128;
  EXPECT_EQ(count_fusion_flops(cfg, plan_channels(cfg), 1, 1), expected);
}

TEST(FusionFlops, QuadraticInSpatialScale) {
  for (auto v : kAll) {
    for (int d : {16, 128, 1024}) {
      const auto cfg = make(v, d);
      const auto plan = plan_channels(cfg);
      const auto base = count_fusion_flops(cfg, plan, 3, 5);
      for (std::uint64_t k = 2; k <= 4; ++k) {
        EXPECT_EQ(count_fusion_flops(cfg, plan, static_cast<int>(3 * k), static_cast<int>(5 * k)), k * k * base);
      }
    }
  }
}

TEST(FusionFlops, MonotoneInHistoryForEarlyFusion) {
  for (auto v : {FusionVariant::EfAvg, FusionVariant::EfDil}) {
    for (int d : {8, 128, 192, 1024}) {
      std::uint64_t prev = 0;
      for (int n = 1; n <= 8; ++n) {
        const auto cfg = make(v, d, n);
        const auto f = count_fusion_flops(cfg, plan_channels(cfg), 4, 4);
        EXPECT_GT(f, prev) << to_string(v) << " d=" << d << " n=" << n;
        prev = f;
      }
    }
  }
}

// Late fusion budgets shrink per frame as N grows, so the output projection
// can appear or vanish; the count then drops even though N rose.
TEST(FusionFlops, LateFusionCanDropWhenProjectionVanishes) {
  const auto n3 = make(FusionVariant::LfDil, 128, 3);
  const auto n4 = make(FusionVariant::LfDil, 128, 4);
  EXPECT_EQ(count_fusion_flops(n3, plan_channels(n3), 1, 1), 65152u);
  EXPECT_EQ(count_fusion_flops(n4, plan_channels(n4), 1, 1), 32896u);
}
