#include "bas/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bas/errors.hpp"
#include "bas/imageio.hpp"
#include "bas/numeric.hpp"

namespace fs = std::filesystem;

namespace bas {

namespace {

struct IndexLine {
  std::string id;
  std::vector<std::string> fields;
  int line_no;
};

std::vector<IndexLine> read_index_file(const fs::path &file) {
  std::ifstream in(file);
  if (!in) throw IngestError("missing index file: " + file.string());
  std::vector<IndexLine> lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    IndexLine out;
    out.line_no = line_no;
    if (!(ss >> out.id)) continue;  // blank line
    std::string tok;
    while (ss >> tok) out.fields.push_back(tok);
    lines.push_back(std::move(out));
  }
  return lines;
}

double parse_number(const std::string &tok, const fs::path &file, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception &) {
    throw IngestError("malformed number '" + tok + "' in " + file.string() + " line " +
                      std::to_string(line_no));
  }
}

std::string category_display_name(const std::string &dir_name) {
  // CUB directories look like "001.Black_footed_Albatross"
  const auto dot = dir_name.find('.');
  if (dot != std::string::npos && dot + 1 < dir_name.size()) return dir_name.substr(dot + 1);
  return dir_name;
}

}  // namespace

DatasetManifest load_cub_format(const fs::path &root, const std::string &split) {
  if (split != "train" && split != "test")
    throw ConfigError("split must be 'train' or 'test', got '" + split + "'");

  const fs::path images_file = root / "images.txt";
  const fs::path labels_file = root / "image_class_labels.txt";
  const fs::path split_file = root / "train_test_split.txt";
  const fs::path boxes_file = root / "bounding_boxes.txt";

  std::vector<std::pair<std::string, std::string>> image_order;  // (id, rel path)
  std::map<std::string, std::string> rel_of;
  for (const auto &l : read_index_file(images_file)) {
    if (l.fields.size() != 1)
      throw IngestError("malformed entry in " + images_file.string() + " line " +
                        std::to_string(l.line_no));
    if (!rel_of.emplace(l.id, l.fields[0]).second)
      throw IngestError("duplicate image id " + l.id + " in " + images_file.string() + " line " +
                        std::to_string(l.line_no));
    image_order.emplace_back(l.id, l.fields[0]);
  }

  std::map<std::string, int> label_of;
  int max_label = 0;
  for (const auto &l : read_index_file(labels_file)) {
    if (l.fields.size() != 1)
      throw IngestError("malformed entry in " + labels_file.string() + " line " +
                        std::to_string(l.line_no));
    const int lab = static_cast<int>(parse_number(l.fields[0], labels_file, l.line_no));
    if (lab < 1)
      throw IngestError("class label must be >= 1 in " + labels_file.string() + " line " +
                        std::to_string(l.line_no));
    label_of[l.id] = lab - 1;
    max_label = std::max(max_label, lab);
  }

  std::map<std::string, bool> is_train;
  for (const auto &l : read_index_file(split_file)) {
    if (l.fields.size() != 1)
      throw IngestError("malformed entry in " + split_file.string() + " line " +
                        std::to_string(l.line_no));
    is_train[l.id] = parse_number(l.fields[0], split_file, l.line_no) != 0.0;
  }

  std::map<std::string, std::vector<BBox>> boxes_of;
  for (const auto &l : read_index_file(boxes_file)) {
    if (l.fields.size() != 4)
      throw IngestError("malformed box in " + boxes_file.string() + " line " +
                        std::to_string(l.line_no));
    const double x = parse_number(l.fields[0], boxes_file, l.line_no);
    const double y = parse_number(l.fields[1], boxes_file, l.line_no);
    const double w = parse_number(l.fields[2], boxes_file, l.line_no);
    const double h = parse_number(l.fields[3], boxes_file, l.line_no);
    if (w <= 0.0 || h <= 0.0)
      throw IngestError("degenerate box (w=" + l.fields[2] + ", h=" + l.fields[3] + ") in " +
                        boxes_file.string() + " line " + std::to_string(l.line_no));
    boxes_of[l.id].push_back(BBox{x, y, x + w, y + h});
  }

  DatasetManifest manifest;
  manifest.root = root;
  manifest.split = split;

  std::vector<std::string> categories(static_cast<std::size_t>(max_label));
  for (auto &name : categories) name.clear();

  const bool want_train = split == "train";
  for (const auto &[id, rel] : image_order) {
    const auto lab_it = label_of.find(id);
    if (lab_it == label_of.end())
      throw IngestError("image id " + id + " missing from " + labels_file.string());
    const auto split_it = is_train.find(id);
    if (split_it == is_train.end())
      throw IngestError("image id " + id + " missing from " + split_file.string());

    const std::string dir = fs::path(rel).parent_path().string();
    if (lab_it->second >= 0 && lab_it->second < max_label && categories[lab_it->second].empty())
      categories[lab_it->second] = category_display_name(dir);

    if (split_it->second != want_train) continue;

    ManifestEntry entry;
    entry.image_id = id;
    entry.rel_path = rel;
    entry.category = lab_it->second;

    const fs::path image_path = root / "images" / rel;
    if (!fs::exists(image_path))
      throw IngestError("referenced image does not exist: " + image_path.string());
    const auto [iw, ih] = image_size(image_path);

    const auto box_it = boxes_of.find(id);
    if (box_it != boxes_of.end()) {
      for (const BBox &b : box_it->second) {
        if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > iw || b.y2 > ih)
          throw IngestError("box outside image bounds for image_id " + id + " (" + rel + ")");
        entry.boxes.push_back(b);
      }
    }

    fs::path mask_rel = fs::path(rel).replace_extension(".png");
    for (const char *mask_dir : {"segmentations", "masks"}) {
      if (fs::exists(root / mask_dir / mask_rel)) {
        entry.mask_rel_path = (fs::path(mask_dir) / mask_rel).string();
        break;
      }
    }
    manifest.entries.push_back(std::move(entry));
  }

  for (int i = 0; i < max_label; ++i)
    if (categories[i].empty()) categories[i] = "class_" + std::to_string(i + 1);
  manifest.categories = std::move(categories);
  return manifest;
}

DatasetManifest load_folder_format(const fs::path &root, const std::string &split) {
  if (split != "train" && split != "test")
    throw ConfigError("split must be 'train' or 'test', got '" + split + "'");
  const fs::path split_dir = root / split;
  if (!fs::is_directory(split_dir))
    throw IngestError("missing split directory: " + split_dir.string());

  // Canonical category list comes from the train tree so indices agree
  // across splits.
  const fs::path canon = fs::is_directory(root / "train") ? root / "train" : split_dir;
  std::vector<std::string> categories;
  for (const auto &e : fs::directory_iterator(canon))
    if (e.is_directory()) categories.push_back(e.path().filename().string());
  std::sort(categories.begin(), categories.end());
  if (categories.empty()) throw IngestError("no category directories under " + canon.string());

  DatasetManifest manifest;
  manifest.root = root;
  manifest.split = split;
  manifest.categories = categories;

  for (int c = 0; c < static_cast<int>(categories.size()); ++c) {
    const fs::path cat_dir = split_dir / categories[c];
    if (!fs::is_directory(cat_dir)) continue;
    std::vector<std::string> files;
    for (const auto &e : fs::directory_iterator(cat_dir))
      if (e.is_regular_file()) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
      ManifestEntry entry;
      entry.rel_path = (fs::path(split) / categories[c] / f).string();
      entry.image_id = entry.rel_path;
      entry.category = c;
      manifest.entries.push_back(std::move(entry));
    }
  }
  return manifest;
}

Sample load_sample(const DatasetManifest &manifest, int index) {
  if (index < 0 || index >= static_cast<int>(manifest.entries.size()))
    throw ContractError("sample index out of range");
  const ManifestEntry &e = manifest.entries[index];
  Sample s;
  s.image_id = e.image_id;
  s.category = e.category;
  s.boxes = e.boxes;
  const fs::path image_path =
      fs::exists(manifest.root / "images" / e.rel_path)
          ? manifest.root / "images" / e.rel_path
          : manifest.root / e.rel_path;  // folder layout keeps paths below root
  s.image = read_image(image_path);
  if (!e.mask_rel_path.empty()) {
    s.mask = read_mask(manifest.root / e.mask_rel_path);
    if (s.mask.h != s.image.h || s.mask.w != s.image.w)
      throw IngestError("mask shape differs from image for image_id " + e.image_id);
    s.has_mask = true;
  }
  return s;
}

// --------------------------------------------------------------------------
// augmentation

int resize_target_for(int out_size) {
  return static_cast<int>(std::lround(out_size * 256.0 / 224.0));
}

BBox mask_tight_box(const Tensor &mask) {
  int x1 = mask.w, y1 = mask.h, x2 = -1, y2 = -1;
  for (int i = 0; i < mask.h; ++i) {
    for (int j = 0; j < mask.w; ++j) {
      if (mask.data[static_cast<std::size_t>(i) * mask.w + j] > 0.5) {
        x1 = std::min(x1, j);
        y1 = std::min(y1, i);
        x2 = std::max(x2, j);
        y2 = std::max(y2, i);
      }
    }
  }
  if (x2 < 0) return BBox{0, 0, 0, 0};
  return BBox{static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2 + 1),
              static_cast<double>(y2 + 1)};
}

namespace {

std::vector<BBox> scale_boxes(const std::vector<BBox> &boxes, double sx, double sy) {
  std::vector<BBox> out;
  out.reserve(boxes.size());
  for (const BBox &b : boxes) out.push_back(BBox{b.x1 * sx, b.y1 * sy, b.x2 * sx, b.y2 * sy});
  return out;
}

std::vector<BBox> crop_boxes(const std::vector<BBox> &boxes, int ox, int oy, int out_size) {
  std::vector<BBox> out;
  for (const BBox &b : boxes) {
    BBox t{std::clamp(b.x1 - ox, 0.0, static_cast<double>(out_size)),
           std::clamp(b.y1 - oy, 0.0, static_cast<double>(out_size)),
           std::clamp(b.x2 - ox, 0.0, static_cast<double>(out_size)),
           std::clamp(b.y2 - oy, 0.0, static_cast<double>(out_size))};
    if (t.valid()) out.push_back(t);
  }
  return out;
}

Tensor crop_tensor(const Tensor &t, int ox, int oy, int out_size) {
  Tensor out(1, t.c, out_size, out_size);
  for (int c = 0; c < t.c; ++c) {
    for (int i = 0; i < out_size; ++i) {
      const double *src =
          t.data.data() + (static_cast<std::size_t>(c) * t.h + (i + oy)) * t.w + ox;
      double *dst = out.data.data() + (static_cast<std::size_t>(c) * out_size + i) * out_size;
      std::copy_n(src, out_size, dst);
    }
  }
  return out;
}

void hflip_tensor(Tensor &t) {
  for (int c = 0; c < t.c; ++c) {
    for (int i = 0; i < t.h; ++i) {
      double *row = t.data.data() + (static_cast<std::size_t>(c) * t.h + i) * t.w;
      std::reverse(row, row + t.w);
    }
  }
}

std::vector<BBox> hflip_boxes(const std::vector<BBox> &boxes, int width) {
  std::vector<BBox> out;
  out.reserve(boxes.size());
  for (const BBox &b : boxes) out.push_back(BBox{width - b.x2, b.y1, width - b.x1, b.y2});
  return out;
}

AugmentedSample apply_geometry(const Sample &sample, int out_size, int ox, int oy, bool flip) {
  const int target = resize_target_for(out_size);
  AugmentedSample out;
  out.image_id = sample.image_id;
  out.category = sample.category;

  Tensor resized = bilinear_resize(sample.image, target, target);
  out.image = crop_tensor(resized, ox, oy, out_size);

  const double sx = static_cast<double>(target) / sample.image.w;
  const double sy = static_cast<double>(target) / sample.image.h;
  out.boxes = crop_boxes(scale_boxes(sample.boxes, sx, sy), ox, oy, out_size);

  if (sample.has_mask) {
    Tensor mask_resized = nearest_resize(sample.mask, target, target);
    out.mask = crop_tensor(mask_resized, ox, oy, out_size);
    out.has_mask = true;
  }
  if (flip) {
    hflip_tensor(out.image);
    out.boxes = hflip_boxes(out.boxes, out_size);
    if (out.has_mask) hflip_tensor(out.mask);
  }
  return out;
}

}  // namespace

AugmentedSample augment_train(const Sample &sample, int out_size, Rng &rng, bool hflip) {
  const int target = resize_target_for(out_size);
  if (out_size > target) throw ContractError("output size exceeds resize target");
  const int span = target - out_size;
  const bool flip = hflip && rng.coin();

  const double scale = static_cast<double>(target) / sample.image.w;
  const double scale_y = static_cast<double>(target) / sample.image.h;
  const bool has_boxes = !sample.boxes.empty();

  int ox = span / 2, oy = span / 2;
  constexpr int kRetryCap = 10;
  for (int attempt = 0; attempt < kRetryCap; ++attempt) {
    const int cx = span > 0 ? rng.uniform_int(span + 1) : 0;
    const int cy = span > 0 ? rng.uniform_int(span + 1) : 0;
    if (!has_boxes ||
        !crop_boxes(scale_boxes(sample.boxes, scale, scale_y), cx, cy, out_size).empty()) {
      ox = cx;
      oy = cy;
      return apply_geometry(sample, out_size, ox, oy, flip);
    }
  }
  return apply_geometry(sample, out_size, span / 2, span / 2, flip);
}

AugmentedSample augment_eval(const Sample &sample, int out_size) {
  const int target = resize_target_for(out_size);
  const int off = (target - out_size) / 2;
  return apply_geometry(sample, out_size, off, off, false);
}

void SyntheticConfig::validate() const {
  if (num_categories < 2) throw ConfigError("synthetic num_categories must be >= 2");
  if (image_size < 16) throw ConfigError("synthetic image_size must be >= 16");
  if (train_per_category < 1 || test_per_category < 0)
    throw ConfigError("synthetic samples per category out of range");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min) || !(scale_max <= 1.0))
    throw ConfigError("shape scale range must satisfy 0 < min <= max <= 1");
  if (background != "noise" && background != "gradient" && background != "checker")
    throw ConfigError("unknown background texture '" + background + "'");
}

}  // namespace bas
