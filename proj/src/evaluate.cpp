#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "bas/errors.hpp"
#include "bas/imageio.hpp"
#include "bas/inference.hpp"
#include "bas/numeric.hpp"
#include "bas/plot.hpp"
#include "bas/probe.hpp"
#include "bas/run.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bas {

namespace {

constexpr int kEvalBatch = 16;

std::string sanitize_id(const std::string &id) {
  std::string out = id;
  for (char &c : out)
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  return out;
}

std::vector<double> logits_row(const Tensor &logits, int n) {
  std::vector<double> out(logits.c);
  for (int c = 0; c < logits.c; ++c) out[c] = logits.data[static_cast<std::size_t>(n) * logits.c + c];
  return out;
}

/// Classification scores averaged over four corner crops + center crop,
/// each with its mirror.
std::vector<double> ten_crop_scores(BASModel &model, const Sample &sample, int input_size) {
  const int target = resize_target_for(input_size);
  Tensor resized = bilinear_resize(sample.image, target, target);
  const int span = target - input_size;
  const int offsets[5][2] = {{0, 0}, {span, 0}, {0, span}, {span, span}, {span / 2, span / 2}};

  std::vector<Tensor> crops;
  for (const auto &off : offsets) {
    Tensor crop(1, 3, input_size, input_size);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < input_size; ++i)
        std::copy_n(resized.data.data() +
                        (static_cast<std::size_t>(c) * target + i + off[1]) * target + off[0],
                    input_size,
                    crop.data.data() +
                        (static_cast<std::size_t>(c) * input_size + i) * input_size);
    Tensor flipped = crop;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < input_size; ++i) {
        double *row =
            flipped.data.data() + (static_cast<std::size_t>(c) * input_size + i) * input_size;
        std::reverse(row, row + input_size);
      }
    crops.push_back(std::move(crop));
    crops.push_back(std::move(flipped));
  }
  auto fwd = model.forward_eval(stack_batch(crops));
  std::vector<double> mean_probs(fwd.logits.c, 0.0);
  for (int n = 0; n < fwd.logits.n; ++n) {
    const std::vector<double> probs = softmax(logits_row(fwd.logits, n));
    for (int c = 0; c < fwd.logits.c; ++c) mean_probs[c] += probs[c] / fwd.logits.n;
  }
  return mean_probs;
}

}  // namespace

EvalPassOutputs run_eval_pass(BASModel &model, const DatasetManifest &manifest,
                              const EvalSection &eval, int input_size, bool mask_metrics) {
  const int total = static_cast<int>(manifest.entries.size());
  const int num_cats = model.spec().num_categories;
  const bool gt_known_protocol = eval.protocol == "gt_known";
  if (eval.k < 1 || eval.k > num_cats)
    throw ConfigError("eval k=" + std::to_string(eval.k) + " out of range [1," +
                      std::to_string(num_cats) + "]");

  EvalPassOutputs out;
  out.num_images = total;
  int top1_hits = 0, top5_hits = 0;
  int curve_count = 0;
  std::array<double, 256> curve_sum{};
  double peak_t_sum = 0.0, peak_iou_sum = 0.0;

  for (int begin = 0; begin < total; begin += kEvalBatch) {
    const int end = std::min(begin + kEvalBatch, total);
    std::vector<Sample> samples;
    std::vector<AugmentedSample> augs;
    std::vector<Tensor> images;
    for (int i = begin; i < end; ++i) {
      samples.push_back(load_sample(manifest, i));
      augs.push_back(augment_eval(samples.back(), input_size));
      images.push_back(augs.back().image);
    }
    auto fwd = model.forward_eval(stack_batch(images));

    for (int bi = 0; bi < end - begin; ++bi) {
      const AugmentedSample &aug = augs[bi];
      const int gt = aug.category;

      std::vector<double> scores = eval.ten_crop
                                       ? ten_crop_scores(model, samples[bi], input_size)
                                       : softmax(logits_row(fwd.logits, bi));
      const std::vector<int> order = topk_indices(scores, num_cats);
      const bool top1 = order[0] == gt;
      bool top5 = false;
      for (int r = 0; r < std::min(5, num_cats); ++r) top5 = top5 || order[r] == gt;
      top1_hits += top1;
      top5_hits += top5;

      Tensor maps_i = slice_sample(fwd.maps, bi);
      const Tensor fused = fuse_topk(maps_i, scores, eval.k, gt);
      const Tensor norm = minmax01(bilinear_resize(fused, input_size, input_size));
      const BBox box = extract_box(norm, eval.tau);

      if (!aug.boxes.empty()) {
        ImageRecord rec;
        rec.image_id = aug.image_id;
        rec.predicted = box;
        rec.top1_hit = top1;
        rec.top5_hit = top5;
        rec.iou = -1.0;
        for (const BBox &g : aug.boxes) {
          const double v = iou(box, g);
          if (v > rec.iou) {
            rec.iou = v;
            rec.gt = g;
          }
        }
        rec.gt_area_fraction = rec.gt.area() / (static_cast<double>(input_size) * input_size);
        rec.protocol_box = box;
        rec.protocol_iou = rec.iou;
        if (!gt_known_protocol) {
          const Tensor fused_free = fuse_topk(maps_i, scores, eval.k, std::nullopt);
          const Tensor norm_free = minmax01(bilinear_resize(fused_free, input_size, input_size));
          rec.protocol_box = extract_box(norm_free, eval.tau);
          rec.protocol_iou = 0.0;
          for (const BBox &g : aug.boxes)
            rec.protocol_iou = std::max(rec.protocol_iou, iou(rec.protocol_box, g));
        }
        out.records.push_back(std::move(rec));
      }

      if (mask_metrics && aug.has_mask && aug.mask.max_value() > 0.5) {
        const PeakResult peak = peak_metrics(norm, aug.mask);
        for (int t = 0; t < 256; ++t) curve_sum[t] += peak.curve[t];
        peak_t_sum += peak.peak_t;
        peak_iou_sum += peak.peak_iou;
        ++curve_count;
      }
    }
  }

  if (total > 0) {
    out.top1_cls = 100.0 * top1_hits / total;
    out.top5_cls = 100.0 * top5_hits / total;
  }
  if (curve_count > 0) {
    out.has_masks = true;
    for (int t = 0; t < 256; ++t) out.mean_curve[t] = curve_sum[t] / curve_count;
    out.mean_peak_t = peak_t_sum / curve_count;
    out.mean_peak_iou = peak_iou_sum / curve_count;
  }
  return out;
}

EvalReport evaluate_model(BASModel &model, const DatasetManifest &manifest,
                          const EvalSection &eval, int input_size,
                          const std::optional<fs::path> &out_dir,
                          std::vector<ImageRecord> *records_out) {
  EvalPassOutputs pass = run_eval_pass(model, manifest, eval, input_size, /*mask_metrics=*/true);

  EvalReport report;
  report.num_images = pass.num_images;
  const LocAccuracy acc = loc_accuracies(pass.records);
  report.gt_known = acc.gt_known;
  report.top1_loc = acc.top1;
  report.top5_loc = acc.top5;
  report.top1_cls = pass.top1_cls;
  report.top5_cls = pass.top5_cls;
  report.correct_iou = correct_iou_stats(pass.records);
  report.size_buckets = size_bucket_analysis(pass.records);
  if (pass.has_masks) {
    report.has_mask_metrics = true;
    report.iou_threshold_curve = pass.mean_curve;
    const PeakResult peak = peak_of_curve(pass.mean_curve);
    report.peak_t = peak.peak_t;
    report.peak_iou = peak.peak_iou;
    report.per_image_peak_t = pass.mean_peak_t;
    report.per_image_peak_iou = pass.mean_peak_iou;
  }

  if (records_out) *records_out = pass.records;

  if (out_dir) {
    fs::create_directories(*out_dir / "curves");
    {
      std::ofstream mj(*out_dir / "metrics.json");
      mj << report.to_json() << "\n";
    }
    {
      std::ofstream jl(*out_dir / "per_image.jsonl");
      for (const auto &r : pass.records) {
        json row;
        row["image_id"] = r.image_id;
        row["predicted_box"] = {r.protocol_box.x1, r.protocol_box.y1, r.protocol_box.x2,
                                r.protocol_box.y2};
        row["gt_iou"] = r.protocol_iou;
        row["top1_hit"] = r.top1_hit;
        row["top5_hit"] = r.top5_hit;
        jl << row.dump() << "\n";
      }
    }
    if (pass.has_masks) {
      std::ofstream c(*out_dir / "curves" / "iou_threshold.csv");
      c << "threshold,iou\n";
      PlotSeries s{"mean IoU", {}, {}, {40, 110, 220}};
      for (int t = 0; t < 256; ++t) {
        c << t << "," << pass.mean_curve[t] << "\n";
        s.xs.push_back(t);
        s.ys.push_back(pass.mean_curve[t]);
      }
      PlotSpec spec;
      spec.title = "IoU vs threshold";
      spec.xlabel = "threshold";
      spec.ylabel = "IoU";
      spec.series = {s};
      render_line_plot(*out_dir / "curves" / "iou_threshold.png", spec);
    }
    {
      std::ofstream c(*out_dir / "curves" / "iou_distribution.csv");
      c << "rank,iou\n";
      std::vector<double> vals = report.correct_iou.values;
      std::sort(vals.begin(), vals.end());
      PlotSeries s{"correct IoU", {}, {}, {200, 90, 40}};
      for (std::size_t i = 0; i < vals.size(); ++i) {
        c << i << "," << vals[i] << "\n";
        s.xs.push_back(static_cast<double>(i));
        s.ys.push_back(vals[i]);
      }
      if (!vals.empty()) {
        PlotSpec spec;
        spec.title = "IoU distribution (correct localizations)";
        spec.xlabel = "rank";
        spec.ylabel = "IoU";
        spec.series = {s};
        render_line_plot(*out_dir / "curves" / "iou_distribution.png", spec);
      }
    }
    {
      std::ofstream c(*out_dir / "curves" / "size_buckets.csv");
      c << "lo,hi,total,correct,gt_known\n";
      PlotSeries s{"gt-known", {}, {}, {60, 160, 90}};
      int i = 0;
      for (const auto &b : report.size_buckets) {
        c << b.lo << "," << b.hi << "," << b.total << "," << b.correct << "," << b.gt_known
          << "\n";
        s.xs.push_back(i++);
        s.ys.push_back(b.gt_known);
      }
      PlotSpec spec;
      spec.title = "GT-known by object size bucket";
      spec.xlabel = "bucket";
      spec.ylabel = "accuracy (%)";
      spec.series = {s};
      render_line_plot(*out_dir / "curves" / "size_buckets.png", spec);
    }
  }
  return report;
}

EvalReport evaluate_checkpoint(const fs::path &checkpoint, const RunConfig &cfg,
                               const std::optional<fs::path> &out_dir) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  auto [train_m, test_m] = load_datasets(cfg);
  (void)train_m;
  const int input = cfg.dataset.input_size > 0 ? cfg.dataset.input_size : ck.meta.input_size;
  return evaluate_model(*ck.model, test_m, cfg.eval, input, out_dir);
}

TauSweepResult auto_tau(BASModel &model, const DatasetManifest &manifest, EvalSection eval,
                        int input_size) {
  TauSweepResult out;
  double best = -1.0;
  for (int i = 1; i <= 10; ++i) {
    const double tau = 0.05 * i;
    eval.tau = tau;
    EvalPassOutputs pass = run_eval_pass(model, manifest, eval, input_size, false);
    const double gt_known = loc_accuracies(pass.records).gt_known;
    out.gt_known_by_tau.emplace_back(tau, gt_known);
    if (gt_known > best) {
      best = gt_known;
      out.best_tau = tau;
    }
  }
  eval.tau = out.best_tau;
  out.best_report = evaluate_model(model, manifest, eval, input_size, std::nullopt);
  return out;
}

std::vector<SweepRow> sweep_run(const RunConfig &base, const std::string &axis,
                                const std::vector<std::string> &values, const fs::path &out_dir,
                                const std::string &checkpoint) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const bool retrain_axis = axis == "lam" || axis == "split_point";
  const bool eval_axis = axis == "k" || axis == "tau";
  if (!retrain_axis && !eval_axis)
    throw ConfigError("unknown sweep axis '" + axis + "' (lam|k|tau|split_point)");

  fs::create_directories(out_dir);
  std::vector<SweepRow> rows;

  if (retrain_axis) {
    for (const std::string &v : values) {
      RunConfig cfg = base;
      cfg.output_dir = (out_dir / (axis + "_" + sanitize_id(v))).string();
      if (axis == "lam")
        cfg.loss.lambda = std::stod(v);
      else
        cfg.backbone.split_point = v;
      TrainSummary s = train_run(cfg);
      rows.push_back({v, s.final_report});
    }
  } else {
    std::unique_ptr<BASModel> model;
    int input_size = base.dataset.input_size;
    DatasetManifest test_m;
    if (!checkpoint.empty()) {
      LoadedCheckpoint ck = load_checkpoint(checkpoint);
      model = std::move(ck.model);
      if (ck.meta.input_size > 0) input_size = ck.meta.input_size;
      auto [train_m, tm] = load_datasets(base);
      (void)train_m;
      test_m = std::move(tm);
    } else {
      RunConfig cfg = base;
      cfg.output_dir = (out_dir / "base_model").string();
      TrainSummary s = train_run(cfg);
      LoadedCheckpoint ck = load_checkpoint(s.best_checkpoint);
      model = std::move(ck.model);
      auto [train_m, tm] = load_datasets(base);
      (void)train_m;
      test_m = std::move(tm);
    }
    for (const std::string &v : values) {
      EvalSection eval = base.eval;
      if (axis == "k")
        eval.k = std::stoi(v);
      else
        eval.tau = std::stod(v);
      rows.push_back({v, evaluate_model(*model, test_m, eval, input_size, std::nullopt)});
    }
  }

  std::ofstream csv(out_dir / "sweep.csv");
  csv << axis << ",gt_known,top1_loc,top5_loc,top1_cls,top5_cls,peak_t,peak_iou\n";
  PlotSeries s{"gt-known", {}, {}, {40, 110, 220}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &r = rows[i].report;
    csv << rows[i].value << "," << r.gt_known << "," << r.top1_loc << "," << r.top5_loc << ","
        << r.top1_cls << "," << r.top5_cls << "," << r.peak_t << "," << r.peak_iou << "\n";
    double x = static_cast<double>(i);
    try {
      x = std::stod(rows[i].value);
    } catch (...) {
    }
    s.xs.push_back(x);
    s.ys.push_back(r.gt_known);
  }
  PlotSpec spec;
  spec.title = "GT-known vs " + axis;
  spec.xlabel = axis;
  spec.ylabel = "GT-known (%)";
  spec.series = {s};
  render_line_plot(out_dir / "sweep.png", spec);
  return rows;
}

std::vector<fs::path> visualize_run(BASModel &model, const DatasetManifest &manifest,
                                    const std::vector<std::string> &ids, int limit,
                                    const EvalSection &eval, int input_size,
                                    const fs::path &out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const Protocol protocol = protocol_from_string(eval.protocol);
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    const auto &entry = manifest.entries[i];
    if (!ids.empty() &&
        std::find(ids.begin(), ids.end(), entry.image_id) == ids.end())
      continue;
    if (ids.empty() && static_cast<int>(written.size()) >= limit) break;

    Sample sample = load_sample(manifest, i);
    AugmentedSample aug = augment_eval(sample, input_size);
    LocalizationResult loc =
        localize(model, aug.image, protocol, eval.k, eval.tau, aug.category);

    BBox gt_box{0, 0, 0, 0};
    double best_area = -1.0;
    for (const BBox &b : aug.boxes)
      if (b.area() > best_area) {
        best_area = b.area();
        gt_box = b;
      }
    Tensor overlay = render_overlay(aug.image, loc.fused_map, gt_box, loc.predicted_box);
    const fs::path path = out_dir / (sanitize_id(entry.image_id) + ".png");
    write_image(path, overlay);
    written.push_back(path);
  }
  return written;
}

ProbeRunSummary probe_run(BASModel &model, const DatasetManifest &manifest, int input_size,
                          int n_min, int n_max, int max_samples, bool image_level,
                          const fs::path &out_dir) {
  fs::create_directories(out_dir / "curves");
  const int stride = model.spec().stride_at_split();
  const int feat = input_size / stride;
  if (feat < 1) throw ConfigError("input size too small for the split stride");

  ProbeRunSummary summary;
  double rho_act_sum = 0.0, rho_ent_sum = 0.0;
  json per_sample = json::array();

  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    if (summary.samples_used >= max_samples) break;
    if (manifest.entries[i].mask_rel_path.empty()) continue;
    Sample sample = load_sample(manifest, i);
    if (!sample.has_mask) continue;
    AugmentedSample aug = augment_eval(sample, input_size);
    if (!aug.has_mask || aug.mask.max_value() < 0.5) {
      ++summary.samples_skipped;
      continue;
    }

    MaskFamily family;
    try {
      family = build_mask_family(aug.mask, n_min, n_max, feat, feat);
    } catch (const std::exception &) {
      ++summary.samples_skipped;
      continue;
    }
    if (family.members.size() < 3) {
      ++summary.samples_skipped;
      continue;
    }

    const std::vector<ProbePoint> points =
        probe_model(model, aug.image, aug.category, family, image_level);

    std::vector<double> areas, acts, ents;
    for (const auto &p : points) {
      areas.push_back(p.area_fraction);
      acts.push_back(p.fg_activation);
      ents.push_back(p.entropy);
    }
    const double rho_act = spearman(areas, acts);
    const double rho_ent = spearman(areas, ents);
    rho_act_sum += rho_act;
    rho_ent_sum += rho_ent;
    ++summary.samples_used;

    double base_fraction = 0.0;
    for (const auto &m : family.members)
      if (m.n == 0) base_fraction = m.area_fraction;
    const std::string stem = sanitize_id(manifest.entries[i].image_id);
    emit_probe_curves(points, base_fraction, out_dir / "curves" / (stem + ".csv"),
                      out_dir / "curves" / (stem + ".png"));

    json row;
    row["image_id"] = manifest.entries[i].image_id;
    row["rho_activation"] = rho_act;
    row["rho_entropy"] = rho_ent;
    row["members"] = points.size();
    per_sample.push_back(row);
  }

  if (summary.samples_used > 0) {
    summary.mean_rho_activation = rho_act_sum / summary.samples_used;
    summary.mean_rho_entropy = rho_ent_sum / summary.samples_used;
  }
  json j;
  j["samples_used"] = summary.samples_used;
  j["samples_skipped"] = summary.samples_skipped;
  j["mean_rho_activation"] = summary.mean_rho_activation;
  j["mean_rho_entropy"] = summary.mean_rho_entropy;
  j["per_sample"] = per_sample;
  std::ofstream out(out_dir / "summary.json");
  out << j.dump(2) << "\n";
  return summary;
}

}  // namespace bas
