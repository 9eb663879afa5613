#pragma once

// COCO-style annotation files: {"images": [...], "annotations": [...],
// "categories": [...]}, boxes as [x, y, w, h]. Unknown fields are ignored.
// Extensions understood on read and written on export: annotation
// "track_id" (or "track") and image "frame_index" / "timestamp_ms".

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsnet/scene.hpp"

namespace lsnet {

struct CocoCategory {
  int id = 0;
  std::string name;
  friend bool operator==(const CocoCategory&, const CocoCategory&) = default;
};

struct CocoDataset {
  /// Frames in image-id order; the position is the frame index and the
  /// timestamp is index * frame_interval_ms. No pixel payload.
  std::vector<Frame> frames;
  std::vector<std::int64_t> image_ids;
  TruthStream truth;
  std::vector<CocoCategory> categories;
  int image_width = 0;   // from the first image, 0 when absent
  int image_height = 0;
};

/// Throws ParseError (with line and column) on malformed JSON or wrong field
/// types, MissingField (with a JSON path like "annotations[3].bbox") on
/// absent required fields.
CocoDataset parse_coco_annotations(std::string_view text, double frame_interval_ms = 33.33);
CocoDataset load_coco_annotations(const std::filesystem::path& path,
                                  double frame_interval_ms = 33.33);

void write_coco_annotations(std::ostream& os, std::span<const SceneFrame> frames,
                            int image_width, int image_height);
void save_coco_annotations(const std::filesystem::path& path, std::span<const SceneFrame> frames,
                           int image_width, int image_height);

}  // namespace lsnet
