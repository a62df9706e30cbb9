#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bas/checkpoint.hpp"
#include "bas/data.hpp"
#include "bas/errors.hpp"
#include "bas/run.hpp"
#include "bas/train.hpp"
#include "bas/version.hpp"

namespace fs = std::filesystem;

namespace {

bas::RunConfig load_config(const std::string &path, const std::vector<std::string> &overrides) {
  bas::RunConfig cfg =
      path.empty() ? bas::RunConfig{} : bas::RunConfig::from_json_file(path);
  for (const std::string &o : overrides) cfg.apply_override(o);
  return cfg;
}

std::vector<std::string> split_csv(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::pair<int, int> parse_n_range(const std::string &text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw bas::ConfigError("--n-range expects <min>:<max>, e.g. -4:4");
  return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
}

void print_report(const bas::EvalReport &r) {
  std::cout << "images:      " << r.num_images << "\n"
            << "GT-known:    " << r.gt_known << "\n"
            << "Top-1 Loc:   " << r.top1_loc << "\n"
            << "Top-5 Loc:   " << r.top5_loc << "\n"
            << "Top-1 Cls:   " << r.top1_cls << "\n"
            << "Top-5 Cls:   " << r.top5_cls << "\n";
  if (r.has_mask_metrics)
    std::cout << "Peak_T:      " << r.peak_t << "\n"
              << "Peak_IoU:    " << r.peak_iou << "\n";
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Background-suppression weakly supervised localization toolkit"};
  app.set_version_flag("--version", bas::kVersion);
  app.require_subcommand(1);

  std::string config_path, checkpoint, out_dir, axis, values_csv, ids_csv, split = "test";
  std::string n_range = "-4:4", protocol;
  std::vector<std::string> overrides;
  int topk = 0, num_images = 8, samples = 50;
  double tau = 0.0;
  bool tau_auto = false, image_level = false;

  auto add_common = [&](CLI::App *cmd, bool with_config) {
    if (with_config)
      cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--set", overrides, "dotted-path config override, e.g. optim.lr=0.05");
  };

  CLI::App *train_cmd = app.add_subcommand("train", "train a model from a config");
  add_common(train_cmd, true);

  CLI::App *eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--topk", topk, "fusion size k");
  eval_cmd->add_option("--tau", tau, "box threshold fraction");
  eval_cmd->add_option("--protocol", protocol, "gt_known|top1|top5");
  eval_cmd->add_flag("--tau-auto", tau_auto, "sweep tau 0.05..0.5 and keep the best GT-known");
  eval_cmd->add_option("--out", out_dir, "artifact directory");

  CLI::App *sweep_cmd = app.add_subcommand("sweep", "one-axis experiment sweep");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--axis", axis, "lam|k|tau|split_point")->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out_dir, "sweep output directory")->required();
  sweep_cmd->add_option("--checkpoint", checkpoint,
                        "reuse this model for eval-only axes (k, tau)");

  CLI::App *probe_cmd = app.add_subcommand("probe", "mask-family response curves");
  add_common(probe_cmd, true);
  probe_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  probe_cmd->add_option("--split", split, "train|test");
  probe_cmd->add_option("--n-range", n_range, "erosion/dilation steps, e.g. -4:4");
  probe_cmd->add_option("--samples", samples, "max samples to probe");
  probe_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  probe_cmd->add_flag("--image-level", image_level, "mask the image instead of the feature map");

  CLI::App *vis_cmd = app.add_subcommand("visualize", "heatmap + box overlays");
  add_common(vis_cmd, true);
  vis_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  vis_cmd->add_option("--ids", ids_csv, "comma-separated image ids (default: first --num)");
  vis_cmd->add_option("--num", num_images, "how many images when --ids is not given");
  vis_cmd->add_option("--split", split, "train|test");
  vis_cmd->add_option("--topk", topk, "fusion size k");
  vis_cmd->add_option("--tau", tau, "box threshold fraction");
  vis_cmd->add_option("--protocol", protocol, "gt_known|top1|top5");
  vis_cmd->add_option("--out", out_dir, "overlay directory")->required();

  CLI::App *gen_cmd = app.add_subcommand("gen-data", "materialize a synthetic shapes dataset");
  bas::SyntheticConfig syn;
  std::string gen_out;
  gen_cmd->add_option("--out", gen_out, "dataset root")->required();
  gen_cmd->add_option("--categories", syn.num_categories, "number of categories");
  gen_cmd->add_option("--size", syn.image_size, "image side length");
  gen_cmd->add_option("--train-per-cat", syn.train_per_category, "train samples per category");
  gen_cmd->add_option("--test-per-cat", syn.test_per_category, "test samples per category");
  gen_cmd->add_option("--background", syn.background, "noise|gradient|checker");
  gen_cmd->add_option("--scale-min", syn.scale_min, "min shape area fraction");
  gen_cmd->add_option("--scale-max", syn.scale_max, "max shape area fraction");
  gen_cmd->add_option("--seed", syn.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      bas::RunConfig cfg = load_config(config_path, overrides);
      bas::TrainSummary s = bas::train_run(cfg);
      std::cout << "run dir:     " << s.run_dir.string() << "\n"
                << "best epoch:  " << s.best_epoch << "\n";
      print_report(s.final_report);
      return 0;
    }

    if (*eval_cmd) {
      bas::RunConfig cfg = load_config(config_path, overrides);
      if (topk > 0) cfg.eval.k = topk;
      if (tau > 0.0) cfg.eval.tau = tau;
      if (!protocol.empty()) cfg.eval.protocol = protocol;

      bas::LoadedCheckpoint ck = bas::load_checkpoint(checkpoint);
      auto [train_m, test_m] = bas::load_datasets(cfg);
      (void)train_m;
      const int input =
          cfg.dataset.input_size > 0 ? cfg.dataset.input_size : ck.meta.input_size;
      if (tau_auto) {
        bas::TauSweepResult r = bas::auto_tau(*ck.model, test_m, cfg.eval, input);
        std::cout << "best tau: " << r.best_tau << "\n";
        print_report(r.best_report);
        if (!out_dir.empty()) {
          cfg.eval.tau = r.best_tau;
          bas::evaluate_model(*ck.model, test_m, cfg.eval, input, fs::path(out_dir));
        }
        return 0;
      }
      std::optional<fs::path> out;
      if (!out_dir.empty()) out = fs::path(out_dir);
      bas::EvalReport r = bas::evaluate_model(*ck.model, test_m, cfg.eval, input, out);
      print_report(r);
      return 0;
    }

    if (*sweep_cmd) {
      bas::RunConfig cfg = load_config(config_path, overrides);
      auto rows = bas::sweep_run(cfg, axis, split_csv(values_csv), out_dir, checkpoint);
      std::cout << axis << ",gt_known,top1_loc,top5_loc\n";
      for (const auto &row : rows)
        std::cout << row.value << "," << row.report.gt_known << "," << row.report.top1_loc << ","
                  << row.report.top5_loc << "\n";
      return 0;
    }

    if (*probe_cmd) {
      bas::RunConfig cfg = load_config(config_path, overrides);
      bas::LoadedCheckpoint ck = bas::load_checkpoint(checkpoint);
      auto [train_m, test_m] = bas::load_datasets(cfg);
      const bas::DatasetManifest &m = split == "train" ? train_m : test_m;
      const int input =
          cfg.dataset.input_size > 0 ? cfg.dataset.input_size : ck.meta.input_size;
      const auto [n_min, n_max] = parse_n_range(n_range);
      bas::ProbeRunSummary s =
          bas::probe_run(*ck.model, m, input, n_min, n_max, samples, image_level, out_dir);
      std::cout << "samples:             " << s.samples_used << " (skipped "
                << s.samples_skipped << ")\n"
                << "rho(area, act):      " << s.mean_rho_activation << "\n"
                << "rho(area, entropy):  " << s.mean_rho_entropy << "\n";
      return 0;
    }

    if (*vis_cmd) {
      bas::RunConfig cfg = load_config(config_path, overrides);
      if (topk > 0) cfg.eval.k = topk;
      if (tau > 0.0) cfg.eval.tau = tau;
      if (!protocol.empty()) cfg.eval.protocol = protocol;
      bas::LoadedCheckpoint ck = bas::load_checkpoint(checkpoint);
      auto [train_m, test_m] = bas::load_datasets(cfg);
      const bas::DatasetManifest &m = split == "train" ? train_m : test_m;
      const int input =
          cfg.dataset.input_size > 0 ? cfg.dataset.input_size : ck.meta.input_size;
      auto written = bas::visualize_run(*ck.model, m, split_csv(ids_csv), num_images, cfg.eval,
                                        input, out_dir);
      std::cout << "wrote " << written.size() << " overlays to " << out_dir << "\n";
      return 0;
    }

    if (*gen_cmd) {
      bas::SyntheticDataset ds = bas::generate_synthetic(syn, gen_out);
      std::cout << "train entries: " << ds.train.entries.size() << "\n"
                << "test entries:  " << ds.test.entries.size() << "\n"
                << "categories:    " << ds.train.num_categories() << "\n";
      return 0;
    }
  } catch (const bas::NumericError &e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
