#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bas/data.hpp"
#include "bas/errors.hpp"
#include "bas/imageio.hpp"
#include "bas/numeric.hpp"
#include "bas/rng.hpp"

namespace fs = std::filesystem;

namespace bas {

namespace {

enum class ShapeKind { Square, Circle, Triangle, Plus, Ring };

constexpr std::array<ShapeKind, 5> kShapeOrder = {ShapeKind::Square, ShapeKind::Circle,
                                                  ShapeKind::Triangle, ShapeKind::Plus,
                                                  ShapeKind::Ring};

const char *shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Square: return "square";
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Plus: return "plus";
    case ShapeKind::Ring: return "ring";
  }
  return "shape";
}

// Largest area fraction the shape can reach with a 1 px border on each side.
double reachable_fraction(ShapeKind k, int size) {
  const double u = size - 2.0;
  const double s2 = static_cast<double>(size) * size;
  switch (k) {
    case ShapeKind::Square: return u * u / s2;
    case ShapeKind::Circle: return 0.25 * 3.14159265358979323846 * u * u / s2;
    case ShapeKind::Triangle: return 0.5 * u * u / s2;
    case ShapeKind::Plus: return 0.6975 * u * u / s2;
    case ShapeKind::Ring: return 0.6975 * 0.25 * 3.14159265358979323846 * u * u / s2;
  }
  return 0.0;
}

// Half extent of the shape's bounding square when sized to pixel area |area|.
double half_extent(ShapeKind k, double area) {
  switch (k) {
    case ShapeKind::Square: return 0.5 * std::sqrt(area);
    case ShapeKind::Circle: return std::sqrt(area / 3.14159265358979323846);
    case ShapeKind::Triangle: return 0.5 * std::sqrt(2.0 * area);
    case ShapeKind::Plus: return 0.5 * std::sqrt(area / 0.6975);
    case ShapeKind::Ring: return std::sqrt(area / (0.6975 * 3.14159265358979323846));
  }
  return 0.0;
}

// Membership test against a shape centered at (cx, cy) sized for |area|.
// orient rotates the triangle through its four axis-aligned poses.
bool inside_shape(ShapeKind k, double area, double cx, double cy, int orient, double x, double y) {
  const double dx = x - cx;
  const double dy = y - cy;
  switch (k) {
    case ShapeKind::Square: {
      const double a = 0.5 * std::sqrt(area);
      return std::abs(dx) <= a && std::abs(dy) <= a;
    }
    case ShapeKind::Circle: {
      const double r = std::sqrt(area / 3.14159265358979323846);
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeKind::Triangle: {
      const double l = std::sqrt(2.0 * area);
      const double hx = (orient & 1) ? -dx : dx;
      const double hy = (orient & 2) ? -dy : dy;
      return hx >= -l / 2 && hy >= -l / 2 && hx + hy <= 0.0;
    }
    case ShapeKind::Plus: {
      const double l = std::sqrt(area / 0.6975);
      const double w = 0.45 * l;
      return (std::abs(dx) <= w / 2 && std::abs(dy) <= l / 2) ||
             (std::abs(dy) <= w / 2 && std::abs(dx) <= l / 2);
    }
    case ShapeKind::Ring: {
      const double r = std::sqrt(area / (0.6975 * 3.14159265358979323846));
      const double rr = dx * dx + dy * dy;
      return rr <= r * r && rr >= (0.55 * r) * (0.55 * r);
    }
  }
  return false;
}

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Tensor render_background(const std::string &kind, int size, Rng &rng) {
  Tensor img(1, 3, size, size);
  const int plane = size * size;
  auto put = [&](int i, int j, const Rgb &c) {
    const std::size_t p = static_cast<std::size_t>(i) * size + j;
    img.data[p] = c.r;
    img.data[plane + p] = c.g;
    img.data[2 * plane + p] = c.b;
  };
  if (kind == "noise") {
    // low-resolution color field upsampled, so the clutter has blob scale
    const int cells = 8;
    Tensor field(1, 3, cells, cells);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < cells * cells; ++i)
        field.data[static_cast<std::size_t>(c) * cells * cells + i] = rng.uniform(0.1, 0.55);
    Tensor up = bilinear_resize(field, size, size);
    img = up;
  } else if (kind == "gradient") {
    const Rgb a = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.1, 0.4), rng.uniform(0.2, 0.5));
    const Rgb b = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.1, 0.4), rng.uniform(0.2, 0.5));
    const double angle = rng.uniform(0, 2 * 3.14159265358979323846);
    const double ux = std::cos(angle), uy = std::sin(angle);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        double t = ((j - size / 2.0) * ux + (i - size / 2.0) * uy) / size + 0.5;
        t = std::clamp(t, 0.0, 1.0);
        put(i, j, Rgb{a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t});
      }
    }
  } else {  // checker
    const Rgb a = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.1, 0.4), rng.uniform(0.15, 0.45));
    const Rgb b = hsv_to_rgb(rng.uniform(0, 360), rng.uniform(0.1, 0.4), rng.uniform(0.25, 0.55));
    const int cell = std::max(2, size / (4 + rng.uniform_int(5)));
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) put(i, j, ((i / cell + j / cell) % 2 == 0) ? a : b);
  }
  // fine grain on top
  for (double &v : img.data) v = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
  return img;
}

struct Rendered {
  Tensor image;
  Tensor mask;
  BBox box;
};

Rendered render_sample(const SyntheticConfig &cfg, int category, Rng &rng) {
  const int size = cfg.image_size;
  const ShapeKind kind = kShapeOrder[category % kShapeOrder.size()];

  const double frac = rng.uniform(cfg.scale_min, cfg.scale_max);
  const double area = frac * size * size;
  const double extent = half_extent(kind, area);
  const double lo = extent + 1.0;
  const double hi = size - extent - 1.0;
  if (hi < lo)
    throw ConfigError(std::string("unreachable shape_scale for '") + shape_name(kind) +
                      "' at image_size " + std::to_string(size));
  const double cx = rng.uniform(lo, hi);
  const double cy = rng.uniform(lo, hi);
  const int orient = rng.uniform_int(4);

  // color family: hue band per category, jitter within the band
  const double hue = 360.0 * category / cfg.num_categories + rng.uniform(-12.0, 12.0);
  const Rgb fill = hsv_to_rgb(hue, rng.uniform(0.75, 1.0), rng.uniform(0.75, 1.0));

  Rendered out;
  out.image = render_background(cfg.background, size, rng);
  out.mask = Tensor::zeros(1, 1, size, size);
  const int plane = size * size;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (!inside_shape(kind, area, cx, cy, orient, j + 0.5, i + 0.5)) continue;
      const std::size_t p = static_cast<std::size_t>(i) * size + j;
      const double lum = 1.0 + rng.uniform(-0.06, 0.06);
      out.image.data[p] = std::clamp(fill.r * lum, 0.0, 1.0);
      out.image.data[plane + p] = std::clamp(fill.g * lum, 0.0, 1.0);
      out.image.data[2 * plane + p] = std::clamp(fill.b * lum, 0.0, 1.0);
      out.mask.data[p] = 1.0;
    }
  }
  out.box = mask_tight_box(out.mask);
  if (!out.box.valid())
    throw ConfigError("synthetic shape rasterized to an empty mask; enlarge shape_scale");
  return out;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig &cfg, const fs::path &root) {
  cfg.validate();
  for (int c = 0; c < std::min<int>(cfg.num_categories, kShapeOrder.size()); ++c) {
    const ShapeKind kind = kShapeOrder[c];
    if (cfg.scale_max > reachable_fraction(kind, cfg.image_size))
      throw ConfigError(std::string("unreachable shape_scale for '") + shape_name(kind) +
                        "' at image_size " + std::to_string(cfg.image_size) + " (max " +
                        std::to_string(reachable_fraction(kind, cfg.image_size)) + ")");
  }

  fs::create_directories(root);
  std::ofstream images_f(root / "images.txt");
  std::ofstream labels_f(root / "image_class_labels.txt");
  std::ofstream split_f(root / "train_test_split.txt");
  std::ofstream boxes_f(root / "bounding_boxes.txt");
  if (!images_f || !labels_f || !split_f || !boxes_f)
    throw IoError("cannot create dataset index files under " + root.string());

  int next_id = 1;
  for (int split = 0; split < 2; ++split) {
    const bool train = split == 0;
    const int per_cat = train ? cfg.train_per_category : cfg.test_per_category;
    for (int c = 0; c < cfg.num_categories; ++c) {
      std::ostringstream cat_dir;
      cat_dir << std::setfill('0') << std::setw(3) << (c + 1) << "."
              << shape_name(kShapeOrder[c % kShapeOrder.size()]) << "_" << (c + 1);
      for (int k = 0; k < per_cat; ++k) {
        Rng rng(mix64(cfg.seed, (static_cast<std::uint64_t>(split) << 32) | c,
                      static_cast<std::uint64_t>(k)));
        Rendered r = render_sample(cfg, c, rng);

        std::ostringstream name;
        name << (train ? "train" : "test") << "_" << std::setfill('0') << std::setw(4) << k
             << ".png";
        const std::string rel = cat_dir.str() + "/" + name.str();
        write_image(root / "images" / rel, r.image);
        write_gray(root / "masks" / fs::path(rel).replace_extension(".png"), r.mask);

        images_f << next_id << " " << rel << "\n";
        labels_f << next_id << " " << (c + 1) << "\n";
        split_f << next_id << " " << (train ? 1 : 0) << "\n";
        boxes_f << next_id << " " << r.box.x1 << " " << r.box.y1 << " " << r.box.width() << " "
                << r.box.height() << "\n";
        ++next_id;
      }
    }
  }
  images_f.close();
  labels_f.close();
  split_f.close();
  boxes_f.close();

  SyntheticDataset out;
  out.train = load_cub_format(root, "train");
  out.test = load_cub_format(root, "test");
  return out;
}

}  // namespace bas
