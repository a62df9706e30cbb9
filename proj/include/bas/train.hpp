#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bas/checkpoint.hpp"
#include "bas/data.hpp"
#include "bas/losses.hpp"
#include "bas/metrics.hpp"
#include "bas/model.hpp"

namespace bas {

struct DatasetSection {
  std::string source = "synthetic";  // synthetic | cub | folder
  std::string root = "data/synthetic";
  int input_size = 64;
  bool hflip = true;
  bool generate_if_missing = true;  // synthetic source only
};

struct OptimSection {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double generator_lr_mult = 10.0;
  std::string schedule = "constant";  // constant | step | cosine
  double step_decay = 0.1;
  std::vector<int> milestones;  // epochs, for the step schedule

  double lr_at(int epoch, int total_epochs) const;
};

struct TrainSection {
  int epochs = 30;
  int batch_size = 16;
  int eval_every = 1;
  int save_every_steps = 0;    // 0: epoch boundaries only
  long long max_steps = 0;     // 0: unlimited
  int threads = 0;             // 0: hardware default
};

struct EvalSection {
  int k = 1;
  double tau = 0.2;
  std::string protocol = "gt_known";
  bool ten_crop = false;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";
  DatasetSection dataset;
  SyntheticConfig synthetic;
  BackboneSpec backbone{{16, 32, 64, 128}, "stage3", 0};
  LossWeights loss;
  OptimSection optim;
  TrainSection train;
  EvalSection eval;
  std::string resume_from;

  static RunConfig from_json_text(const std::string &text);
  static RunConfig from_json_file(const std::filesystem::path &path);
  std::string to_json_text() const;

  /// Apply a dotted-path override such as "optim.lr=0.05".
  void apply_override(const std::string &assignment);
};

/// Momentum SGD with decoupled per-parameter learning-rate multipliers.
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Param *> params, const OptimSection &cfg);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<Param *> params_;
  double momentum_;
  double weight_decay_;
};

struct EpochEval {
  int epoch = 0;
  LocAccuracy loc;
  double top1_cls = 0.0, top5_cls = 0.0;
};

struct TrainSummary {
  std::filesystem::path run_dir;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metrics_path;
  int best_epoch = 0;
  double best_gt_known = 0.0;
  EvalReport final_report;
  bool reached_max_steps = false;
};

class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  TrainSummary run();
  BASModel &model() { return *model_; }
  const RunConfig &config() const { return cfg_; }
  const DatasetManifest &train_manifest() const { return train_manifest_; }
  const DatasetManifest &test_manifest() const { return test_manifest_; }

 private:
  RunConfig cfg_;
  DatasetManifest train_manifest_;
  DatasetManifest test_manifest_;
  std::vector<Sample> train_samples_;
  std::unique_ptr<BASModel> model_;
  std::unique_ptr<SgdOptimizer> optimizer_;
  int start_epoch_ = 0;
  int start_step_in_epoch_ = 0;
  long long global_step_ = 0;

  void save(const std::filesystem::path &path, int epoch, int step_in_epoch,
            const std::string &metrics_json);
  EpochEval quick_eval(int epoch);
};

/// Load the manifests referenced by a config (materializes the synthetic
/// dataset when asked to and missing).
std::pair<DatasetManifest, DatasetManifest> load_datasets(const RunConfig &cfg);

TrainSummary train_run(const RunConfig &cfg);

}  // namespace bas
