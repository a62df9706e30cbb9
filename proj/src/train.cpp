#include "bas/train.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bas/errors.hpp"
#include "bas/numeric.hpp"
#include "bas/run.hpp"
#include "bas/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bas {

// --------------------------------------------------------------------------
// config

namespace {

json config_to_json(const RunConfig &c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["resume_from"] = c.resume_from;
  j["dataset"] = {{"source", c.dataset.source},
                  {"root", c.dataset.root},
                  {"input_size", c.dataset.input_size},
                  {"hflip", c.dataset.hflip},
                  {"generate_if_missing", c.dataset.generate_if_missing}};
  j["synthetic"] = {{"num_categories", c.synthetic.num_categories},
                    {"image_size", c.synthetic.image_size},
                    {"train_per_category", c.synthetic.train_per_category},
                    {"test_per_category", c.synthetic.test_per_category},
                    {"background", c.synthetic.background},
                    {"scale_min", c.synthetic.scale_min},
                    {"scale_max", c.synthetic.scale_max},
                    {"seed", c.synthetic.seed}};
  j["backbone"] = {{"widths", c.backbone.widths},
                   {"split_point", c.backbone.split_point},
                   {"num_categories", c.backbone.num_categories}};
  j["loss"] = {{"alpha", c.loss.alpha},
               {"beta", c.loss.beta},
               {"lambda", c.loss.lambda},
               {"epsilon", c.loss.epsilon}};
  j["optim"] = {{"lr", c.optim.lr},
                {"momentum", c.optim.momentum},
                {"weight_decay", c.optim.weight_decay},
                {"generator_lr_mult", c.optim.generator_lr_mult},
                {"schedule", c.optim.schedule},
                {"step_decay", c.optim.step_decay},
                {"milestones", c.optim.milestones}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"eval_every", c.train.eval_every},
                {"save_every_steps", c.train.save_every_steps},
                {"max_steps", c.train.max_steps},
                {"threads", c.train.threads}};
  j["eval"] = {{"k", c.eval.k},
               {"tau", c.eval.tau},
               {"protocol", c.eval.protocol},
               {"ten_crop", c.eval.ten_crop}};
  return j;
}

RunConfig config_from_json(const json &j) {
  static const std::vector<std::string> known = {"seed",     "output_dir", "resume_from",
                                                 "dataset",  "synthetic",  "backbone",
                                                 "loss",     "optim",      "train",
                                                 "eval"};
  for (const auto &item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw ConfigError("unknown config key '" + item.key() + "'");
  }
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.resume_from = j.value("resume_from", c.resume_from);
  if (j.contains("dataset")) {
    const auto &d = j.at("dataset");
    c.dataset.source = d.value("source", c.dataset.source);
    c.dataset.root = d.value("root", c.dataset.root);
    c.dataset.input_size = d.value("input_size", c.dataset.input_size);
    c.dataset.hflip = d.value("hflip", c.dataset.hflip);
    c.dataset.generate_if_missing = d.value("generate_if_missing", c.dataset.generate_if_missing);
  }
  if (j.contains("synthetic")) {
    const auto &s = j.at("synthetic");
    c.synthetic.num_categories = s.value("num_categories", c.synthetic.num_categories);
    c.synthetic.image_size = s.value("image_size", c.synthetic.image_size);
    c.synthetic.train_per_category = s.value("train_per_category", c.synthetic.train_per_category);
    c.synthetic.test_per_category = s.value("test_per_category", c.synthetic.test_per_category);
    c.synthetic.background = s.value("background", c.synthetic.background);
    c.synthetic.scale_min = s.value("scale_min", c.synthetic.scale_min);
    c.synthetic.scale_max = s.value("scale_max", c.synthetic.scale_max);
    c.synthetic.seed = s.value("seed", c.synthetic.seed);
  }
  if (j.contains("backbone")) {
    const auto &b = j.at("backbone");
    c.backbone.widths = b.value("widths", c.backbone.widths);
    c.backbone.split_point = b.value("split_point", c.backbone.split_point);
    c.backbone.num_categories = b.value("num_categories", c.backbone.num_categories);
  }
  if (j.contains("loss")) {
    const auto &l = j.at("loss");
    c.loss.alpha = l.value("alpha", c.loss.alpha);
    c.loss.beta = l.value("beta", c.loss.beta);
    c.loss.lambda = l.value("lambda", c.loss.lambda);
    c.loss.epsilon = l.value("epsilon", c.loss.epsilon);
  }
  if (j.contains("optim")) {
    const auto &o = j.at("optim");
    c.optim.lr = o.value("lr", c.optim.lr);
    c.optim.momentum = o.value("momentum", c.optim.momentum);
    c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
    c.optim.generator_lr_mult = o.value("generator_lr_mult", c.optim.generator_lr_mult);
    c.optim.schedule = o.value("schedule", c.optim.schedule);
    c.optim.step_decay = o.value("step_decay", c.optim.step_decay);
    c.optim.milestones = o.value("milestones", c.optim.milestones);
  }
  if (j.contains("train")) {
    const auto &t = j.at("train");
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.eval_every = t.value("eval_every", c.train.eval_every);
    c.train.save_every_steps = t.value("save_every_steps", c.train.save_every_steps);
    c.train.max_steps = t.value("max_steps", c.train.max_steps);
    c.train.threads = t.value("threads", c.train.threads);
  }
  if (j.contains("eval")) {
    const auto &e = j.at("eval");
    c.eval.k = e.value("k", c.eval.k);
    c.eval.tau = e.value("tau", c.eval.tau);
    c.eval.protocol = e.value("protocol", c.eval.protocol);
    c.eval.ten_crop = e.value("ten_crop", c.eval.ten_crop);
  }
  return c;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string &text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return config_from_json(j);
}

RunConfig RunConfig::from_json_file(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const { return config_to_json(*this).dump(2); }

void RunConfig::apply_override(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json j = config_to_json(*this);
  json *cursor = &j;
  std::istringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cursor->contains(parts[i]))
      throw ConfigError("unknown config path '" + path + "'");
    cursor = &(*cursor)[parts[i]];
  }
  if (!cursor->contains(parts.back()))
    throw ConfigError("unknown config path '" + path + "'");
  json parsed = json::parse(value, nullptr, false);
  (*cursor)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
  *this = config_from_json(j);
}

double OptimSection::lr_at(int epoch, int total_epochs) const {
  if (schedule == "constant") return lr;
  if (schedule == "step") {
    double out = lr;
    for (int m : milestones)
      if (epoch >= m) out *= step_decay;
    return out;
  }
  if (schedule == "cosine") {
    const double t = total_epochs > 1 ? static_cast<double>(epoch) / (total_epochs - 1) : 1.0;
    return lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
  }
  throw ConfigError("unknown lr schedule '" + schedule + "'");
}

// --------------------------------------------------------------------------
// optimizer

SgdOptimizer::SgdOptimizer(std::vector<Param *> params, const OptimSection &cfg)
    : params_(std::move(params)), momentum_(cfg.momentum), weight_decay_(cfg.weight_decay) {}

void SgdOptimizer::step(double lr) {
  for (Param *p : params_) {
    if (p->momentum.empty())
      p->momentum = Tensor::zeros(p->value.n, p->value.c, p->value.h, p->value.w);
    const double step_size = lr * p->lr_mult;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data[i] + weight_decay_ * p->value.data[i];
      p->momentum.data[i] = momentum_ * p->momentum.data[i] + g;
      p->value.data[i] -= step_size * p->momentum.data[i];
    }
  }
}

void SgdOptimizer::zero_grad() {
  for (Param *p : params_) p->zero_grad();
}

// --------------------------------------------------------------------------
// datasets

std::pair<DatasetManifest, DatasetManifest> load_datasets(const RunConfig &cfg) {
  const fs::path root = cfg.dataset.root;
  if (cfg.dataset.source == "synthetic") {
    if (!fs::exists(root / "images.txt")) {
      if (!cfg.dataset.generate_if_missing)
        throw ConfigError("synthetic dataset missing at " + root.string());
      SyntheticDataset ds = generate_synthetic(cfg.synthetic, root);
      return {std::move(ds.train), std::move(ds.test)};
    }
    return {load_cub_format(root, "train"), load_cub_format(root, "test")};
  }
  if (cfg.dataset.source == "cub")
    return {load_cub_format(root, "train"), load_cub_format(root, "test")};
  if (cfg.dataset.source == "folder")
    return {load_folder_format(root, "train"), load_folder_format(root, "test")};
  throw ConfigError("unknown dataset source '" + cfg.dataset.source + "'");
}

// --------------------------------------------------------------------------
// trainer

namespace {

std::optional<std::string> nonfinite_component(const LossBundle &b) {
  if (!std::isfinite(b.l_cls)) return "l_cls";
  if (!std::isfinite(b.l_frg)) return "l_frg";
  if (!std::isfinite(b.l_ac)) return "l_ac";
  if (!std::isfinite(b.l_bas_raw)) return "l_bas_raw";
  if (!std::isfinite(b.l_bas_clamped)) return "l_bas_clamped";
  if (!std::isfinite(b.total)) return "total";
  return std::nullopt;
}

std::vector<int> shuffled_indices(int count, std::uint64_t seed, int epoch) {
  std::vector<int> order(count);
  for (int i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix64(seed, 0x7368756666ULL, static_cast<std::uint64_t>(epoch)));
  for (int i = count - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(order[i], order[j]);
  }
  return order;
}

}  // namespace

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.loss.validate();
  if (cfg_.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg_.train.epochs < 1) throw ConfigError("epochs must be >= 1");

#ifdef _OPENMP
  if (cfg_.train.threads > 0) omp_set_num_threads(cfg_.train.threads);
#endif

  auto [train_m, test_m] = load_datasets(cfg_);
  train_manifest_ = std::move(train_m);
  test_manifest_ = std::move(test_m);
  if (train_manifest_.entries.empty()) throw ConfigError("training split is empty");

  if (cfg_.backbone.num_categories == 0)
    cfg_.backbone.num_categories = train_manifest_.num_categories();
  if (cfg_.backbone.num_categories != train_manifest_.num_categories())
    throw ConfigError("backbone num_categories differs from dataset category count");

  if (!cfg_.resume_from.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg_.resume_from);
    if (ck.model->spec().widths != cfg_.backbone.widths ||
        ck.model->spec().split_point != cfg_.backbone.split_point ||
        ck.model->spec().num_categories != cfg_.backbone.num_categories)
      throw ConfigError("checkpoint backbone differs from config backbone");
    model_ = std::move(ck.model);
    start_epoch_ = ck.meta.epoch;
    start_step_in_epoch_ = ck.meta.step_in_epoch;
    global_step_ = ck.meta.global_step;
  } else {
    model_ = std::make_unique<BASModel>(cfg_.backbone, cfg_.seed);
  }

  for (Param *p : model_->generator_params()) p->lr_mult = cfg_.optim.generator_lr_mult;
  optimizer_ = std::make_unique<SgdOptimizer>(model_->params(), cfg_.optim);

  train_samples_.reserve(train_manifest_.entries.size());
  for (int i = 0; i < static_cast<int>(train_manifest_.entries.size()); ++i)
    train_samples_.push_back(load_sample(train_manifest_, i));
}

void Trainer::save(const fs::path &path, int epoch, int step_in_epoch,
                   const std::string &metrics_json) {
  CheckpointMeta meta;
  meta.input_size = cfg_.dataset.input_size;
  meta.epoch = epoch;
  meta.step_in_epoch = step_in_epoch;
  meta.global_step = global_step_;
  meta.seed = cfg_.seed;
  meta.metrics_json = metrics_json;
  save_checkpoint(path, *model_, meta, /*include_momentum=*/true);
}

EpochEval Trainer::quick_eval(int epoch) {
  EvalPassOutputs pass = run_eval_pass(*model_, test_manifest_, cfg_.eval,
                                       cfg_.dataset.input_size, /*mask_metrics=*/false);
  EpochEval out;
  out.epoch = epoch;
  out.loc = loc_accuracies(pass.records);
  out.top1_cls = pass.top1_cls;
  out.top5_cls = pass.top5_cls;
  return out;
}

TrainSummary Trainer::run() {
  const fs::path run_dir = cfg_.output_dir;
  fs::create_directories(run_dir / "checkpoints");

  {
    std::ofstream cfg_out(run_dir / "config.json");
    cfg_out << cfg_.to_json_text() << "\n";
    std::ofstream info(run_dir / "run_info.json");
    json env;
    env["version"] = kVersion;
    env["config_hash"] = fnv1a_hex(cfg_.to_json_text());
#ifdef _OPENMP
    env["threads"] = omp_get_max_threads();
#else
    env["threads"] = 1;
#endif
    env["compiler"] = kCompilerInfo;
    info << env.dump(2) << "\n";
  }

  const bool fresh_log = start_epoch_ == 0 && start_step_in_epoch_ == 0;
  std::ofstream train_log(run_dir / "train_log.csv",
                          fresh_log ? std::ios::trunc : std::ios::app);
  if (fresh_log) train_log << "step,l_cls,l_frg,l_ac,l_bas_raw,l_bas_clamped,total\n";
  std::ofstream eval_log(run_dir / "eval_log.csv", fresh_log ? std::ios::trunc : std::ios::app);
  if (fresh_log) eval_log << "epoch,gt_known,top1_loc,top5_loc,top1_cls,top5_cls\n";

  TrainSummary summary;
  summary.run_dir = run_dir;
  summary.best_checkpoint = run_dir / "checkpoints" / "best.ckpt";
  summary.last_checkpoint = run_dir / "checkpoints" / "last.ckpt";
  summary.metrics_path = run_dir / "metrics.json";
  summary.best_gt_known = -1.0;

  const int n_train = static_cast<int>(train_samples_.size());
  const int steps_per_epoch = (n_train + cfg_.train.batch_size - 1) / cfg_.train.batch_size;

  int epoch = start_epoch_;
  int resume_step = start_step_in_epoch_;
  if (resume_step >= steps_per_epoch) {
    ++epoch;
    resume_step = 0;
  }

  auto abort_with = [&](const std::string &component, int ep, int step) {
    json diag;
    diag["component"] = component;
    diag["epoch"] = ep;
    diag["global_step"] = global_step_;
    diag["step_in_epoch"] = step;
    std::ofstream out(run_dir / "abort.json");
    out << diag.dump(2) << "\n";
    save(run_dir / "checkpoints" / "last_good.ckpt", ep, step, "{}");
    throw NumericError("training aborted: non-finite " + component + " at step " +
                       std::to_string(global_step_));
  };

  for (; epoch < cfg_.train.epochs; ++epoch) {
    const double lr = cfg_.optim.lr_at(epoch, cfg_.train.epochs);
    const std::vector<int> order = shuffled_indices(n_train, cfg_.seed, epoch);

    for (int step = resume_step; step < steps_per_epoch; ++step) {
      const int begin = step * cfg_.train.batch_size;
      const int end = std::min(begin + cfg_.train.batch_size, n_train);

      std::vector<Tensor> images;
      std::vector<int> labels;
      images.reserve(end - begin);
      for (int bi = begin; bi < end; ++bi) {
        const int idx = order[bi];
        Rng rng(mix64(cfg_.seed, 0x617567ULL ^ static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(idx)));
        AugmentedSample aug = augment_train(train_samples_[idx], cfg_.dataset.input_size, rng,
                                            cfg_.dataset.hflip);
        images.push_back(std::move(aug.image));
        labels.push_back(aug.category);
      }

      Graph g;
      LossBundle bundle;
      try {
        const ValueId input = g.constant(stack_batch(images));
        AMCValues amc = model_->amc_forward(g, input, labels);
        bundle = total_loss(g, amc, labels, cfg_.loss);
      } catch (const NumericError &e) {
        abort_with(e.what(), epoch, step);
      }
      if (auto bad = nonfinite_component(bundle)) abort_with(*bad, epoch, step);

      optimizer_->zero_grad();
      g.backward(bundle.total_id);
      optimizer_->step(lr);
      ++global_step_;

      train_log << global_step_ << "," << bundle.l_cls << "," << bundle.l_frg << ","
                << bundle.l_ac << "," << bundle.l_bas_raw << "," << bundle.l_bas_clamped << ","
                << bundle.total << "\n";

      if (cfg_.train.save_every_steps > 0 &&
          global_step_ % cfg_.train.save_every_steps == 0) {
        save(run_dir / "checkpoints" /
                 ("step_" + std::to_string(global_step_) + ".ckpt"),
             epoch, step + 1, "{}");
      }
      if (cfg_.train.max_steps > 0 && global_step_ >= cfg_.train.max_steps) {
        save(summary.last_checkpoint, epoch, step + 1, "{}");
        summary.reached_max_steps = true;
        return summary;
      }
    }
    resume_step = 0;

    if ((epoch + 1) % cfg_.train.eval_every == 0 || epoch + 1 == cfg_.train.epochs) {
      EpochEval ev = quick_eval(epoch);
      eval_log << epoch << "," << ev.loc.gt_known << "," << ev.loc.top1 << "," << ev.loc.top5
               << "," << ev.top1_cls << "," << ev.top5_cls << "\n";
      eval_log.flush();

      json snap;
      snap["epoch"] = epoch;
      snap["gt_known"] = ev.loc.gt_known;
      snap["top1_loc"] = ev.loc.top1;
      snap["top5_loc"] = ev.loc.top5;
      save(summary.last_checkpoint, epoch + 1, 0, snap.dump());
      if (ev.loc.gt_known > summary.best_gt_known) {
        summary.best_gt_known = ev.loc.gt_known;
        summary.best_epoch = epoch;
        save(summary.best_checkpoint, epoch + 1, 0, snap.dump());
      }
    }
    train_log.flush();
  }

  // final full evaluation of the best checkpoint
  LoadedCheckpoint best = load_checkpoint(summary.best_checkpoint);
  summary.final_report = evaluate_model(*best.model, test_manifest_, cfg_.eval,
                                        cfg_.dataset.input_size, run_dir);
  return summary;
}

TrainSummary train_run(const RunConfig &cfg) {
  Trainer trainer(cfg);
  return trainer.run();
}

}  // namespace bas
