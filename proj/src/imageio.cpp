#include "bas/imageio.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bas/errors.hpp"

namespace bas {

Tensor read_image(const std::filesystem::path &path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path.string());
  Tensor out(1, 3, bgr.rows, bgr.cols);
  const int plane = bgr.rows * bgr.cols;
  for (int i = 0; i < bgr.rows; ++i) {
    const cv::Vec3b *row = bgr.ptr<cv::Vec3b>(i);
    for (int j = 0; j < bgr.cols; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * bgr.cols + j;
      out.data[0 * plane + p] = row[j][2] / 255.0;  // R
      out.data[1 * plane + p] = row[j][1] / 255.0;  // G
      out.data[2 * plane + p] = row[j][0] / 255.0;  // B
    }
  }
  return out;
}

Tensor read_mask(const std::filesystem::path &path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw IoError("cannot read mask: " + path.string());
  Tensor out(1, 1, gray.rows, gray.cols);
  for (int i = 0; i < gray.rows; ++i) {
    const std::uint8_t *row = gray.ptr<std::uint8_t>(i);
    for (int j = 0; j < gray.cols; ++j)
      out.data[static_cast<std::size_t>(i) * gray.cols + j] = row[j] > 127 ? 1.0 : 0.0;
  }
  return out;
}

namespace {

std::uint8_t to_u8(double v) {
  const double x = v * 255.0 + 0.5;
  if (x <= 0.0) return 0;
  if (x >= 255.0) return 255;
  return static_cast<std::uint8_t>(x);
}

}  // namespace

void write_image(const std::filesystem::path &path, const Tensor &image) {
  if (image.n != 1 || image.c != 3) throw ContractError("write_image expects (1,3,H,W)");
  cv::Mat bgr(image.h, image.w, CV_8UC3);
  const int plane = image.plane();
  for (int i = 0; i < image.h; ++i) {
    cv::Vec3b *row = bgr.ptr<cv::Vec3b>(i);
    for (int j = 0; j < image.w; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * image.w + j;
      row[j][0] = to_u8(image.data[2 * plane + p]);
      row[j][1] = to_u8(image.data[1 * plane + p]);
      row[j][2] = to_u8(image.data[0 * plane + p]);
    }
  }
  std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image: " + path.string());
}

void write_gray(const std::filesystem::path &path, const Tensor &plane_t) {
  if (plane_t.n != 1 || plane_t.c != 1) throw ContractError("write_gray expects (1,1,H,W)");
  cv::Mat gray(plane_t.h, plane_t.w, CV_8UC1);
  for (int i = 0; i < plane_t.h; ++i) {
    std::uint8_t *row = gray.ptr<std::uint8_t>(i);
    for (int j = 0; j < plane_t.w; ++j)
      row[j] = to_u8(plane_t.data[static_cast<std::size_t>(i) * plane_t.w + j]);
  }
  std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), gray)) throw IoError("cannot write image: " + path.string());
}

std::pair<int, int> image_size(const std::filesystem::path &path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("cannot read image: " + path.string());
  return {img.cols, img.rows};
}

}  // namespace bas
