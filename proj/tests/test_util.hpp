#pragma once

#include <filesystem>
#include <string>

#include "bas/model.hpp"
#include "bas/rng.hpp"
#include "bas/tensor.hpp"

namespace bas::test {

inline Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = 0.0,
                            double hi = 1.0) {
  Rng rng(seed);
  Tensor t(n, c, h, w);
  for (double &v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline BackboneSpec toy_spec(int categories = 3) {
  BackboneSpec spec;
  spec.widths = {4, 6};
  spec.split_point = "stage1";
  spec.num_categories = categories;
  return spec;
}

/// Unique scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bas_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bas::test
