#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bas/bbox.hpp"
#include "bas/rng.hpp"
#include "bas/tensor.hpp"

namespace bas {

struct ManifestEntry {
  std::string image_id;
  std::string rel_path;  // below <root>/images
  int category = 0;      // 0-based
  std::vector<BBox> boxes;
  std::string mask_rel_path;  // empty when no mask exists
};

/// Immutable index of one dataset split; loading the same root twice
/// yields equal manifests.
struct DatasetManifest {
  std::filesystem::path root;
  std::string split;  // "train" or "test"
  std::vector<std::string> categories;
  std::vector<ManifestEntry> entries;

  int num_categories() const { return static_cast<int>(categories.size()); }
};

/// One decoded sample; image is (1,3,H,W) in [0,1], mask (1,1,H,W) in {0,1}.
struct Sample {
  std::string image_id;
  Tensor image;
  int category = 0;
  std::vector<BBox> boxes;  // original resolution
  Tensor mask;
  bool has_mask = false;
};

/// Parse the four whitespace-separated index files of a CUB-layout root
/// (`images.txt`, `image_class_labels.txt`, `train_test_split.txt`,
/// `bounding_boxes.txt`; boxes given as x y w h). Masks are looked up under
/// `segmentations/` or `masks/`.
DatasetManifest load_cub_format(const std::filesystem::path &root, const std::string &split);

/// Directory-per-category layout: <root>/<split>/<category>/<image files>.
/// No boxes or masks; intended for classification-style fixtures.
DatasetManifest load_folder_format(const std::filesystem::path &root, const std::string &split);

Sample load_sample(const DatasetManifest &manifest, int index);

struct SyntheticConfig {
  int num_categories = 5;
  int image_size = 224;
  int train_per_category = 10;
  int test_per_category = 5;
  std::string background = "noise";  // noise | gradient | checker
  double scale_min = 0.10;           // shape area as a fraction of image area
  double scale_max = 0.30;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  DatasetManifest train;
  DatasetManifest test;
};

/// Materialize a synthetic shapes dataset in the CUB file layout (plus a
/// masks/ tree with exact ground-truth masks). Deterministic under
/// cfg.seed; ground-truth boxes are the tight boxes of the emitted masks.
SyntheticDataset generate_synthetic(const SyntheticConfig &cfg,
                                    const std::filesystem::path &root);

struct AugmentedSample {
  std::string image_id;
  Tensor image;  // (1,3,out,out)
  int category = 0;
  std::vector<BBox> boxes;  // in output coordinates, clipped to the crop
  Tensor mask;              // (1,1,out,out) when has_mask
  bool has_mask = false;
};

/// Pre-crop resize target keeping the 256:224 ratio for any output size.
int resize_target_for(int out_size);

/// Random resized crop with optional horizontal flip. Crops that drop every
/// box are redrawn a few times, then fall back to the center crop.
AugmentedSample augment_train(const Sample &sample, int out_size, Rng &rng, bool hflip);

/// Deterministic resize + center crop.
AugmentedSample augment_eval(const Sample &sample, int out_size);

/// Tight bounding box of a binary mask (half-open); invalid box when empty.
BBox mask_tight_box(const Tensor &mask);

}  // namespace bas
