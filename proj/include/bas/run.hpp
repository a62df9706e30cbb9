#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bas/metrics.hpp"
#include "bas/train.hpp"

namespace bas {

/// Shared per-image evaluation pass. Records carry the GT-known-protocol
/// box (classification hits are tracked across all images, including any
/// without boxes).
struct EvalPassOutputs {
  std::vector<ImageRecord> records;
  int num_images = 0;
  double top1_cls = 0.0, top5_cls = 0.0;  // percent
  bool has_masks = false;
  std::array<double, 256> mean_curve{};
  double mean_peak_t = 0.0, mean_peak_iou = 0.0;  // per-image averages
};

EvalPassOutputs run_eval_pass(BASModel &model, const DatasetManifest &manifest,
                              const EvalSection &eval, int input_size, bool mask_metrics);

/// Full evaluation of one model on one split: per-image records, report,
/// and (when out_dir is given) metrics.json, per_image.jsonl, curves and
/// plots.
EvalReport evaluate_model(BASModel &model, const DatasetManifest &manifest,
                          const EvalSection &eval, int input_size,
                          const std::optional<std::filesystem::path> &out_dir,
                          std::vector<ImageRecord> *records_out = nullptr);

EvalReport evaluate_checkpoint(const std::filesystem::path &checkpoint, const RunConfig &cfg,
                               const std::optional<std::filesystem::path> &out_dir);

/// Evaluate taus 0.05..0.5 (step 0.05) and keep the best GT-known score.
struct TauSweepResult {
  double best_tau = 0.2;
  EvalReport best_report;
  std::vector<std::pair<double, double>> gt_known_by_tau;
};
TauSweepResult auto_tau(BASModel &model, const DatasetManifest &manifest, EvalSection eval,
                        int input_size);

struct SweepRow {
  std::string value;
  EvalReport report;
};

/// One-axis experiment sweep. `lam` and `split_point` retrain per value;
/// `k` and `tau` train once (or reuse `checkpoint`) and re-evaluate.
std::vector<SweepRow> sweep_run(const RunConfig &base, const std::string &axis,
                                const std::vector<std::string> &values,
                                const std::filesystem::path &out_dir,
                                const std::string &checkpoint = "");

/// Heatmap + box overlays for chosen image ids (all of the split when ids
/// is empty, capped by limit).
std::vector<std::filesystem::path> visualize_run(BASModel &model,
                                                 const DatasetManifest &manifest,
                                                 const std::vector<std::string> &ids, int limit,
                                                 const EvalSection &eval, int input_size,
                                                 const std::filesystem::path &out_dir);

struct ProbeRunSummary {
  int samples_used = 0;
  int samples_skipped = 0;
  double mean_rho_activation = 0.0;  // Spearman(area, fg activation)
  double mean_rho_entropy = 0.0;     // Spearman(area, entropy)
};

ProbeRunSummary probe_run(BASModel &model, const DatasetManifest &manifest, int input_size,
                          int n_min, int n_max, int max_samples, bool image_level,
                          const std::filesystem::path &out_dir);

}  // namespace bas
