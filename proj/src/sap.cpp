#include "lsnet/sap.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace lsnet {

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = std::max(0.0, iw) * std::max(0.0, ih);
  const double area_a = std::max(0.0, a.width()) * std::max(0.0, a.height());
  const double area_b = std::max(0.0, b.width()) * std::max(0.0, b.height());
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<double> iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

namespace {

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

MatchResult match_frame(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                        double iou_thr, const std::vector<bool>& gt_ignore) {
  auto ignored = [&](std::size_t g) { return g < gt_ignore.size() && gt_ignore[g]; };
  MatchResult m;
  m.det_match.assign(dets.size(), std::nullopt);
  m.gt_covered.assign(gts.size(), false);
  m.order = score_order(dets);
  for (std::size_t d : m.order) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_covered[g]) continue;
      const double v = iou(dets[d].bbox, gts[g].bbox);
      if (v < iou_thr) continue;
      const bool take = !best || (ignored(*best) && !ignored(g)) ||
                        (ignored(*best) == ignored(g) && v > best_iou);
      if (take) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      m.det_match[d] = best;
      m.gt_covered[*best] = true;
    }
  }
  return m;
}

std::optional<double> average_precision(std::span<const FrameEval> frames, double iou_thr,
                                        AreaRange range,
                                        std::optional<std::size_t> max_dets_per_frame) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pooled;
  std::size_t positives = 0;
  std::vector<bool> ignore;
  std::vector<Detection> kept;

  for (const auto& f : frames) {
    ignore.assign(f.gts.size(), false);
    for (std::size_t g = 0; g < f.gts.size(); ++g) {
      ignore[g] = !range.contains(f.gts[g].area());
      if (!ignore[g]) ++positives;
    }
    kept.clear();
    for (std::size_t i : score_order(f.dets)) kept.push_back(f.dets[i]);
    if (max_dets_per_frame && kept.size() > *max_dets_per_frame) kept.resize(*max_dets_per_frame);

    const MatchResult m = match_frame(kept, f.gts, iou_thr, ignore);
    for (std::size_t d : m.order) {
      if (m.det_match[d]) {
        if (ignore[*m.det_match[d]]) continue;
        pooled.push_back({kept[d].score, true});
      } else {
        if (!range.contains(kept[d].bbox.area())) continue;
        pooled.push_back({kept[d].score, false});
      }
    }
  }
  if (positives == 0) return std::nullopt;

  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<double> recall(pooled.size());
  std::vector<double> precision(pooled.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (pooled[i].tp) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(positives);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: best precision at any recall at least as high.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

SapReport compute_sap_report(std::span<const EvalPairing> pairings, const TruthStream& truth,
                             const SapOptions& options) {
  std::set<int> categories;
  for (const auto& p : pairings) {
    if (p.query_frame_index < 0 || p.query_frame_index >= static_cast<std::int64_t>(truth.size())) continue;
    for (const auto& g : truth[static_cast<std::size_t>(p.query_frame_index)]) {
      categories.insert(g.category);
    }
  }

  std::map<int, std::vector<FrameEval>> per_category;
  for (int c : categories) {
    auto& frames = per_category[c];
    frames.reserve(pairings.size());
    for (const auto& p : pairings) {
      FrameEval fe;
      if (p.query_frame_index >= 0 && p.query_frame_index < static_cast<std::int64_t>(truth.size())) {
        for (const auto& g : truth[static_cast<std::size_t>(p.query_frame_index)]) {
          if (g.category == c) fe.gts.push_back(g);
        }
      }
      if (p.record) {
        for (const auto& d : p.record->detections) {
          if (d.category == c) fe.dets.push_back(d);
        }
      }
      frames.push_back(std::move(fe));
    }
  }

  const auto thresholds = iou_thresholds();
  // Mean over categories at each threshold, then mean over thresholds.
  auto summarize = [&](AreaRange range, std::span<const double> thrs) -> std::optional<double> {
    std::vector<double> per_threshold;
    for (double t : thrs) {
      std::vector<double> per_cat;
      for (const auto& [c, frames] : per_category) {
        if (auto ap = average_precision(frames, t, range, options.max_dets_per_frame)) {
          per_cat.push_back(*ap);
        }
      }
      if (auto m = mean_of(per_cat)) per_threshold.push_back(*m);
    }
    return mean_of(per_threshold);
  };

  SapReport r;
  r.sap = summarize(kAreaAll, thresholds);
  const double t50 = thresholds.front();
  const double t75 = thresholds[5];
  r.sap50 = summarize(kAreaAll, std::span<const double>(&t50, 1));
  r.sap75 = summarize(kAreaAll, std::span<const double>(&t75, 1));
  r.sap_small = summarize(kAreaSmall, thresholds);
  r.sap_medium = summarize(kAreaMedium, thresholds);
  r.sap_large = summarize(kAreaLarge, thresholds);

  for (const auto& [c, frames] : per_category) {
    CategoryAp cat;
    cat.category = c;
    std::vector<double> aps;
    for (double t : thresholds) {
      if (auto ap = average_precision(frames, t, kAreaAll, options.max_dets_per_frame)) aps.push_back(*ap);
    }
    cat.ap = mean_of(aps);
    cat.ap50 = average_precision(frames, t50, kAreaAll, options.max_dets_per_frame);
    cat.ap75 = average_precision(frames, t75, kAreaAll, options.max_dets_per_frame);
    r.per_category.push_back(cat);
  }
  return r;
}

namespace {

std::string fixed6(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string("nan");
}

std::string percent(const std::optional<double>& v) {
  return v ? fmt::format("{:.1f}", 100.0 * *v) : std::string("-");
}

}  // namespace

std::string report_csv_header() { return "sAP,sAP50,sAP75,sAP_s,sAP_m,sAP_l"; }

std::string report_csv_values(const SapReport& r) {
  return fmt::format("{},{},{},{},{},{}", fixed6(r.sap), fixed6(r.sap50), fixed6(r.sap75),
                     fixed6(r.sap_small), fixed6(r.sap_medium), fixed6(r.sap_large));
}

std::string report_key_values(const SapReport& r) {
  std::string out = fmt::format("sAP={}\nsAP50={}\nsAP75={}\nsAP_s={}\nsAP_m={}\nsAP_l={}\n",
                                fixed6(r.sap), fixed6(r.sap50), fixed6(r.sap75),
                                fixed6(r.sap_small), fixed6(r.sap_medium), fixed6(r.sap_large));
  for (const auto& c : r.per_category) {
    out += fmt::format("category.{}.AP={}\ncategory.{}.AP50={}\ncategory.{}.AP75={}\n", c.category,
                       fixed6(c.ap), c.category, fixed6(c.ap50), c.category, fixed6(c.ap75));
  }
  return out;
}

std::string report_table(const SapReport& r) {
  std::string out = fmt::format("{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "sAP", "sAP50", "sAP75",
                                "sAP_s", "sAP_m", "sAP_l");
  out += fmt::format("{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", percent(r.sap), percent(r.sap50),
                     percent(r.sap75), percent(r.sap_small), percent(r.sap_medium),
                     percent(r.sap_large));
  return out;
}

}  // namespace lsnet
