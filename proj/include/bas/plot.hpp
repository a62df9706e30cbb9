#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "bas/bbox.hpp"
#include "bas/tensor.hpp"

namespace bas {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::array<int, 3> rgb{30, 90, 200};
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<PlotSeries> series;
  std::vector<double> dashed_vlines;  // marker positions on the x axis
};

/// Minimal line chart writer (PNG).
void render_line_plot(const std::filesystem::path &path, const PlotSpec &spec, int width = 760,
                      int height = 520);

/// Heatmap overlay with the ground-truth box in red and the predicted box
/// in green. image (1,3,H,W), heat (1,1,H,W) in [0,1].
Tensor render_overlay(const Tensor &image, const Tensor &heat01, const BBox &gt_box,
                      const BBox &predicted_box);

}  // namespace bas
