#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "bas/data.hpp"
#include "bas/inference.hpp"
#include "bas/losses.hpp"
#include "bas/metrics.hpp"
#include "bas/numeric.hpp"
#include "bas/probe.hpp"
#include "bas/run.hpp"
#include "bas/train.hpp"

namespace py = pybind11;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Array3d = py::array_t<double, py::array::c_style | py::array::forcecast>;

bas::Tensor tensor_from_2d(const Array2d &arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  bas::Tensor t(1, 1, static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy_n(arr.data(), t.size(), t.data.data());
  return t;
}

bas::Tensor tensor_from_3d(const Array3d &arr) {
  if (arr.ndim() != 3) throw std::invalid_argument("expected a (C,H,W) array");
  bas::Tensor t(1, static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                static_cast<int>(arr.shape(2)));
  std::copy_n(arr.data(), t.size(), t.data.data());
  return t;
}

py::array_t<double> array_from_plane(const bas::Tensor &t) {
  py::array_t<double> out({t.h, t.w});
  std::copy_n(t.data.data(), static_cast<std::size_t>(t.h) * t.w, out.mutable_data());
  return out;
}

py::tuple box_tuple(const bas::BBox &b) { return py::make_tuple(b.x1, b.y1, b.x2, b.y2); }

bas::BBox box_from_seq(const py::sequence &s) {
  if (py::len(s) != 4) throw std::invalid_argument("box needs 4 values (x1,y1,x2,y2)");
  return bas::BBox{s[0].cast<double>(), s[1].cast<double>(), s[2].cast<double>(),
                   s[3].cast<double>()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core: losses, map fusion, box extraction, metrics, morphology, training";

  m.def(
      "iou",
      [](const py::sequence &a, const py::sequence &b) {
        return bas::iou(box_from_seq(a), box_from_seq(b));
      },
      py::arg("box_a"), py::arg("box_b"),
      "IoU of two half-open (x1,y1,x2,y2) boxes");

  m.def(
      "extract_box",
      [](const Array2d &map, double tau) {
        return box_tuple(bas::extract_box(tensor_from_2d(map), tau));
      },
      py::arg("map"), py::arg("tau") = 0.2,
      "Largest-component tight box of map > tau * max(map)");

  m.def(
      "fuse_topk",
      [](const Array3d &maps, const std::vector<double> &scores, int k,
         std::optional<int> include_category) {
        return array_from_plane(
            bas::fuse_topk(tensor_from_3d(maps), scores, k, include_category));
      },
      py::arg("maps"), py::arg("scores"), py::arg("k"), py::arg("include_category") = py::none(),
      "Mean of the k highest-scoring category maps");

  m.def(
      "minmax01", [](const Array2d &map) { return array_from_plane(bas::minmax01(tensor_from_2d(map))); },
      py::arg("map"));

  m.def(
      "peak_metrics",
      [](const Array2d &map, const Array2d &mask) {
        const bas::PeakResult r = bas::peak_metrics(tensor_from_2d(map), tensor_from_2d(mask));
        py::dict out;
        out["peak_t"] = r.peak_t;
        out["peak_iou"] = r.peak_iou;
        out["curve"] = py::cast(std::vector<double>(r.curve.begin(), r.curve.end()));
        return out;
      },
      py::arg("map"), py::arg("mask"),
      "Mask IoU against (map*255 > t) for t in 0..255, with its peak");

  m.def("loss_bas", &bas::loss_bas_value, py::arg("score_bg"), py::arg("score"),
        py::arg("epsilon") = 1e-8, "Clamped ratio score_bg / (score + epsilon)");
  m.def(
      "loss_area", [](const Array2d &map) { return bas::loss_area_value(tensor_from_2d(map)); },
      py::arg("map_fg"), "Mean foreground-map value");
  m.def(
      "loss_frg",
      [](const std::vector<double> &logits, int target) {
        return bas::cross_entropy(logits, target);
      },
      py::arg("logits"), py::arg("target"));
  m.def(
      "loss_cls",
      [](const std::vector<double> &logits, int target) {
        return bas::cross_entropy(logits, target);
      },
      py::arg("logits"), py::arg("target"));

  m.def(
      "erode",
      [](const Array2d &mask, int k) { return array_from_plane(bas::erode_mask(tensor_from_2d(mask), k)); },
      py::arg("mask"), py::arg("k"));
  m.def(
      "dilate",
      [](const Array2d &mask, int k) {
        return array_from_plane(bas::dilate_mask(tensor_from_2d(mask), k));
      },
      py::arg("mask"), py::arg("k"));

  m.def(
      "build_mask_family",
      [](const Array2d &mask, int n_min, int n_max, int feat_h, int feat_w) {
        const bas::MaskFamily fam =
            bas::build_mask_family(tensor_from_2d(mask), n_min, n_max, feat_h, feat_w);
        py::list members;
        for (const auto &mem : fam.members)
          members.append(py::make_tuple(mem.n, array_from_plane(mem.mask), mem.area_fraction));
        return members;
      },
      py::arg("mask"), py::arg("n_min"), py::arg("n_max"), py::arg("feat_h"), py::arg("feat_w"),
      "Nested masks via 5|n| square-element morphology at feature resolution");

  m.def("spearman", &bas::spearman, py::arg("xs"), py::arg("ys"));

  m.def(
      "generate_synthetic",
      [](const std::string &root, int num_categories, int image_size, int train_per_category,
         int test_per_category, const std::string &background, double scale_min, double scale_max,
         std::uint64_t seed) {
        bas::SyntheticConfig cfg;
        cfg.num_categories = num_categories;
        cfg.image_size = image_size;
        cfg.train_per_category = train_per_category;
        cfg.test_per_category = test_per_category;
        cfg.background = background;
        cfg.scale_min = scale_min;
        cfg.scale_max = scale_max;
        cfg.seed = seed;
        const bas::SyntheticDataset ds = bas::generate_synthetic(cfg, root);
        py::dict out;
        out["train_entries"] = ds.train.entries.size();
        out["test_entries"] = ds.test.entries.size();
        out["categories"] = ds.train.categories;
        return out;
      },
      py::arg("root"), py::arg("num_categories") = 5, py::arg("image_size") = 64,
      py::arg("train_per_category") = 10, py::arg("test_per_category") = 5,
      py::arg("background") = "noise", py::arg("scale_min") = 0.10, py::arg("scale_max") = 0.30,
      py::arg("seed") = 0);

  m.def(
      "train_run",
      [](const std::string &config_json) {
        const bas::TrainSummary s = bas::train_run(bas::RunConfig::from_json_text(config_json));
        py::dict out;
        out["run_dir"] = s.run_dir.string();
        out["best_checkpoint"] = s.best_checkpoint.string();
        out["best_epoch"] = s.best_epoch;
        out["gt_known"] = s.final_report.gt_known;
        out["top1_loc"] = s.final_report.top1_loc;
        out["top5_loc"] = s.final_report.top5_loc;
        out["metrics_json"] = s.final_report.to_json();
        return out;
      },
      py::arg("config_json"), "Train from a JSON config string; returns summary metrics");

  m.def(
      "evaluate_checkpoint",
      [](const std::string &checkpoint, const std::string &config_json) {
        const bas::EvalReport r = bas::evaluate_checkpoint(
            checkpoint, bas::RunConfig::from_json_text(config_json), std::nullopt);
        return r.to_json();
      },
      py::arg("checkpoint"), py::arg("config_json"),
      "Evaluate a checkpoint on the config's test split; returns the report as JSON");
}
