#pragma once

// Streaming average precision. COCO conventions throughout: IoU thresholds
// 0.50:0.05:0.95, 101-point interpolated AP, area splits at 32^2 and 96^2.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsnet/boxes.hpp"
#include "lsnet/scene.hpp"
#include "lsnet/streaming.hpp"

namespace lsnet {

/// Intersection over union; 0 when the union is empty. Negative extents are
/// treated as empty.
double iou(const BBox& a, const BBox& b);

/// The ten IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> iou_thresholds();

struct MatchResult {
  /// Per detection, in input order: index of the matched ground truth.
  std::vector<std::optional<std::size_t>> det_match;
  /// Per ground truth: whether some detection took it.
  std::vector<bool> gt_covered;
  /// Detection indices in the order they were matched (score descending,
  /// ties by input order).
  std::vector<std::size_t> order;
};

/// Greedy matching. Each detection, highest score first, takes the free
/// ground truth with the highest IoU >= iou_thr (ties go to the lower index).
/// Ground truths flagged in `gt_ignore` are only taken when no unflagged one
/// qualifies. Callers filter by category beforehand.
MatchResult match_frame(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                        double iou_thr, const std::vector<bool>& gt_ignore = {});

/// Half-open area interval [lo, hi).
struct AreaRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double area) const { return area >= lo && area < hi; }
};

inline constexpr AreaRange kAreaAll{};
inline constexpr AreaRange kAreaSmall{0.0, kSmallAreaThreshold};
inline constexpr AreaRange kAreaMedium{kSmallAreaThreshold, kLargeAreaThreshold};
inline constexpr AreaRange kAreaLarge{kLargeAreaThreshold, std::numeric_limits<double>::infinity()};

/// Detections and ground truth of one frame, already restricted to one
/// category.
struct FrameEval {
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
};

/// Pooled 101-point AP over frames. Ground truth outside `range` is ignored;
/// detections matched to ignored ground truth, or unmatched with their own
/// area outside `range`, count as neither TP nor FP. Returns nullopt when no
/// ground truth falls inside `range`. `max_dets_per_frame` keeps only the
/// top-scoring detections of each frame.
std::optional<double> average_precision(std::span<const FrameEval> frames, double iou_thr,
                                        AreaRange range = kAreaAll,
                                        std::optional<std::size_t> max_dets_per_frame = {});

struct CategoryAp {
  int category = 0;
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
};

/// Fields are in [0, 1]; a field is empty when no ground truth exists for it.
struct SapReport {
  std::optional<double> sap;
  std::optional<double> sap50;
  std::optional<double> sap75;
  std::optional<double> sap_small;
  std::optional<double> sap_medium;
  std::optional<double> sap_large;
  std::vector<CategoryAp> per_category;  // sorted by category id
};

struct SapOptions {
  std::optional<std::size_t> max_dets_per_frame;
};

/// AP per (category, threshold), averaged over categories that have ground
/// truth, then over thresholds. Pairings without a record contribute no
/// detections against their frame's ground truth.
SapReport compute_sap_report(std::span<const EvalPairing> pairings, const TruthStream& truth,
                             const SapOptions& options = {});

/// "sAP,sAP50,sAP75,sAP_s,sAP_m,sAP_l"
std::string report_csv_header();
/// Six values with 6 decimals; an empty field is written as "nan".
std::string report_csv_values(const SapReport& r);
/// "key=value" lines for every field, per-category entries included.
std::string report_key_values(const SapReport& r);
/// Human view: percentages with one decimal, "-" for empty fields.
std::string report_table(const SapReport& r);

}  // namespace lsnet
