#include "lsnet/coco_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsnet/error.hpp"

namespace lsnet {

using nlohmann::json;

namespace {

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return fmt::format("line {}, column {}", line, col);
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, fmt::format("{} is not an object", path));
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MissingField, fmt::format("{}.{}", path, key));
  return *it;
}

template <typename T>
T as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", path, e.what()));
  }
}

const json& array_field(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_array()) throw Error(ErrorCode::ParseError, fmt::format("{}.{} must be an array", path, key));
  return v;
}

}  // namespace

CocoDataset parse_coco_annotations(std::string_view text, double frame_interval_ms) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError,
                fmt::format("{}: {}", line_col(text, e.byte == 0 ? 0 : e.byte - 1), e.what()));
  }

  const json& images = array_field(root, "images", "$");
  const json& annotations = array_field(root, "annotations", "$");

  struct ImageEntry {
    std::int64_t id;
    int width;
    int height;
  };
  std::vector<ImageEntry> entries;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = fmt::format("images[{}]", i);
    const json& img = images[i];
    ImageEntry e{as<std::int64_t>(field(img, "id", path), path + ".id"), 0, 0};
    if (img.contains("width")) e.width = as<int>(img["width"], path + ".width");
    if (img.contains("height")) e.height = as<int>(img["height"], path + ".height");
    entries.push_back(e);
  }
  std::sort(entries.begin(), entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].id == entries[i - 1].id) {
      throw Error(ErrorCode::ParseError, fmt::format("duplicate image id {}", entries[i].id));
    }
  }

  CocoDataset ds;
  std::map<std::int64_t, std::size_t> frame_of;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    frame_of[entries[k].id] = k;
    ds.image_ids.push_back(entries[k].id);
    Frame f;
    f.index = static_cast<std::int64_t>(k);
    f.timestamp_ms = static_cast<double>(k) * frame_interval_ms;
    ds.frames.push_back(std::move(f));
  }
  if (!entries.empty()) {
    ds.image_width = entries.front().width;
    ds.image_height = entries.front().height;
  }
  ds.truth.resize(entries.size());

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string path = fmt::format("annotations[{}]", i);
    const json& ann = annotations[i];
    const auto image_id = as<std::int64_t>(field(ann, "image_id", path), path + ".image_id");
    const int category = as<int>(field(ann, "category_id", path), path + ".category_id");
    const json& bbox = field(ann, "bbox", path);
    if (!bbox.is_array() || bbox.size() != 4) {
      throw Error(ErrorCode::ParseError, fmt::format("{}.bbox must be [x, y, w, h]", path));
    }
    const double x = as<double>(bbox[0], path + ".bbox[0]");
    const double y = as<double>(bbox[1], path + ".bbox[1]");
    const double w = as<double>(bbox[2], path + ".bbox[2]");
    const double h = as<double>(bbox[3], path + ".bbox[3]");
    if (w < 0.0 || h < 0.0) {
      throw Error(ErrorCode::ParseError, fmt::format("{}.bbox has negative size", path));
    }
    auto it = frame_of.find(image_id);
    if (it == frame_of.end()) {
      throw Error(ErrorCode::ParseError, fmt::format("{}.image_id {} names no image", path, image_id));
    }
    int track = -1;
    if (ann.contains("track_id")) {
      track = as<int>(ann["track_id"], path + ".track_id");
    } else if (ann.contains("track")) {
      track = as<int>(ann["track"], path + ".track");
    } else if (ann.contains("id")) {
      track = as<int>(ann["id"], path + ".id");
    }
    GroundTruthBox gt;
    gt.bbox = {x, y, x + w, y + h};
    gt.category = category;
    gt.track_id = track;
    gt.frame_index = static_cast<std::int64_t>(it->second);
    ds.truth[it->second].push_back(gt);
  }

  if (root.contains("categories")) {
    const json& cats = root["categories"];
    if (!cats.is_array()) throw Error(ErrorCode::ParseError, "$.categories must be an array");
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const std::string path = fmt::format("categories[{}]", i);
      CocoCategory c;
      c.id = as<int>(field(cats[i], "id", path), path + ".id");
      if (cats[i].contains("name")) c.name = as<std::string>(cats[i]["name"], path + ".name");
      ds.categories.push_back(std::move(c));
    }
  }
  return ds;
}

CocoDataset load_coco_annotations(const std::filesystem::path& path, double frame_interval_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_coco_annotations(buf.str(), frame_interval_ms);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.detail()));
  }
}

void write_coco_annotations(std::ostream& os, std::span<const SceneFrame> frames, int image_width,
                            int image_height) {
  json images = json::array();
  json annotations = json::array();
  std::set<int> categories;
  std::int64_t next_id = 1;
  for (const auto& sf : frames) {
    images.push_back({{"id", sf.frame.index},
                      {"file_name", fmt::format("frame_{:06d}.png", sf.frame.index)},
                      {"width", image_width},
                      {"height", image_height},
                      {"frame_index", sf.frame.index},
                      {"timestamp_ms", sf.frame.timestamp_ms}});
    for (const auto& gt : sf.truth) {
      categories.insert(gt.category);
      annotations.push_back({{"id", next_id++},
                             {"image_id", sf.frame.index},
                             {"category_id", gt.category},
                             {"bbox", {gt.bbox.x_min, gt.bbox.y_min, gt.bbox.width(), gt.bbox.height()}},
                             {"area", gt.area()},
                             {"iscrowd", 0},
                             {"track_id", gt.track_id}});
    }
  }
  json cats = json::array();
  for (int c : categories) cats.push_back({{"id", c}, {"name", fmt::format("class_{}", c)}});
  json root = {{"images", std::move(images)},
               {"annotations", std::move(annotations)},
               {"categories", std::move(cats)}};
  os << root.dump(1) << '\n';
}

void save_coco_annotations(const std::filesystem::path& path, std::span<const SceneFrame> frames,
                           int image_width, int image_height) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  write_coco_annotations(out, frames, image_width, image_height);
}

}  // namespace lsnet
