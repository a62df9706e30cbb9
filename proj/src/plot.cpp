#include "bas/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bas/errors.hpp"

namespace bas {

namespace {

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range nice_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi <= lo) {
    const double pad = std::max(1e-6, std::abs(lo) * 0.1 + 1e-6);
    return {lo - pad, lo + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

}  // namespace

void render_line_plot(const std::filesystem::path &path, const PlotSpec &spec, int width,
                      int height) {
  const int ml = 70, mr = 20, mt = 40, mb = 55;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto &s : spec.series) {
    for (double v : s.xs) {
      xlo = std::min(xlo, v);
      xhi = std::max(xhi, v);
    }
    for (double v : s.ys) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  for (double v : spec.dashed_vlines) {
    xlo = std::min(xlo, v);
    xhi = std::max(xhi, v);
  }
  const Range xr = nice_range(xlo, xhi);
  const Range yr = nice_range(ylo, yhi);

  auto px = [&](double x) {
    return ml + static_cast<int>((x - xr.lo) / (xr.hi - xr.lo) * (width - ml - mr));
  };
  auto py = [&](double y) {
    return height - mb - static_cast<int>((y - yr.lo) / (yr.hi - yr.lo) * (height - mt - mb));
  };

  const cv::Scalar axis(60, 60, 60);
  cv::rectangle(canvas, cv::Point(ml, mt), cv::Point(width - mr, height - mb), axis, 1);
  for (int t = 0; t <= 4; ++t) {
    const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", xv);
    cv::putText(canvas, buf, cv::Point(px(xv) - 14, height - mb + 20), cv::FONT_HERSHEY_SIMPLEX,
                0.38, axis, 1, cv::LINE_AA);
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    cv::putText(canvas, buf, cv::Point(6, py(yv) + 4), cv::FONT_HERSHEY_SIMPLEX, 0.38, axis, 1,
                cv::LINE_AA);
    cv::line(canvas, cv::Point(px(xv), height - mb), cv::Point(px(xv), height - mb + 4), axis, 1);
    cv::line(canvas, cv::Point(ml - 4, py(yv)), cv::Point(ml, py(yv)), axis, 1);
  }

  for (double vx : spec.dashed_vlines) {
    const int x = px(vx);
    for (int y = mt; y < height - mb; y += 10)
      cv::line(canvas, cv::Point(x, y), cv::Point(x, std::min(y + 5, height - mb)),
               cv::Scalar(120, 120, 120), 1);
  }

  int legend_y = mt + 16;
  for (const auto &s : spec.series) {
    const cv::Scalar color(s.rgb[2], s.rgb[1], s.rgb[0]);
    for (std::size_t i = 0; i + 1 < s.xs.size(); ++i) {
      cv::line(canvas, cv::Point(px(s.xs[i]), py(s.ys[i])),
               cv::Point(px(s.xs[i + 1]), py(s.ys[i + 1])), color, 2, cv::LINE_AA);
    }
    if (!s.label.empty()) {
      cv::line(canvas, cv::Point(width - mr - 130, legend_y - 4),
               cv::Point(width - mr - 105, legend_y - 4), color, 2);
      cv::putText(canvas, s.label, cv::Point(width - mr - 100, legend_y),
                  cv::FONT_HERSHEY_SIMPLEX, 0.42, axis, 1, cv::LINE_AA);
      legend_y += 18;
    }
  }

  cv::putText(canvas, spec.title, cv::Point(ml, 24), cv::FONT_HERSHEY_SIMPLEX, 0.55, axis, 1,
              cv::LINE_AA);
  cv::putText(canvas, spec.xlabel, cv::Point(width / 2 - 40, height - 14),
              cv::FONT_HERSHEY_SIMPLEX, 0.45, axis, 1, cv::LINE_AA);
  cv::putText(canvas, spec.ylabel, cv::Point(8, mt - 10), cv::FONT_HERSHEY_SIMPLEX, 0.45, axis, 1,
              cv::LINE_AA);

  std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), canvas)) throw IoError("cannot write plot: " + path.string());
}

Tensor render_overlay(const Tensor &image, const Tensor &heat01, const BBox &gt_box,
                      const BBox &predicted_box) {
  if (image.n != 1 || image.c != 3) throw ContractError("render_overlay expects (1,3,H,W) image");
  if (heat01.h != image.h || heat01.w != image.w)
    throw ContractError("render_overlay heatmap size mismatch");

  cv::Mat heat_u8(image.h, image.w, CV_8UC1);
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j)
      heat_u8.at<std::uint8_t>(i, j) = static_cast<std::uint8_t>(
          std::clamp(heat01.data[static_cast<std::size_t>(i) * image.w + j], 0.0, 1.0) * 255.0);
  cv::Mat heat_color;
  cv::applyColorMap(heat_u8, heat_color, cv::COLORMAP_JET);

  cv::Mat bgr(image.h, image.w, CV_8UC3);
  const int plane = image.plane();
  for (int i = 0; i < image.h; ++i) {
    cv::Vec3b *row = bgr.ptr<cv::Vec3b>(i);
    for (int j = 0; j < image.w; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * image.w + j;
      row[j][0] = static_cast<std::uint8_t>(std::clamp(image.data[2 * plane + p], 0.0, 1.0) * 255);
      row[j][1] = static_cast<std::uint8_t>(std::clamp(image.data[plane + p], 0.0, 1.0) * 255);
      row[j][2] = static_cast<std::uint8_t>(std::clamp(image.data[p], 0.0, 1.0) * 255);
    }
  }
  cv::Mat blend;
  cv::addWeighted(bgr, 0.5, heat_color, 0.5, 0.0, blend);

  auto to_rect = [](const BBox &b) {
    return cv::Rect(cv::Point(static_cast<int>(b.x1), static_cast<int>(b.y1)),
                    cv::Point(static_cast<int>(b.x2), static_cast<int>(b.y2)));
  };
  cv::rectangle(blend, to_rect(gt_box), cv::Scalar(0, 0, 255), 2);          // red
  cv::rectangle(blend, to_rect(predicted_box), cv::Scalar(0, 255, 0), 2);  // green

  Tensor out(1, 3, image.h, image.w);
  for (int i = 0; i < image.h; ++i) {
    const cv::Vec3b *row = blend.ptr<cv::Vec3b>(i);
    for (int j = 0; j < image.w; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * image.w + j;
      out.data[p] = row[j][2] / 255.0;
      out.data[plane + p] = row[j][1] / 255.0;
      out.data[2 * plane + p] = row[j][0] / 255.0;
    }
  }
  return out;
}

}  // namespace bas
