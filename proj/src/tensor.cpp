#include "bas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bas/errors.hpp"

namespace bas {

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str());
  return data[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min_value() const {
  return *std::min_element(data.begin(), data.end());
}

double Tensor::max_value() const {
  return *std::max_element(data.begin(), data.end());
}

double Tensor::mean_value() const {
  if (data.empty()) return 0.0;
  return std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
}

Tensor stack_batch(const std::vector<Tensor> &items) {
  if (items.empty()) throw ContractError("stack_batch on empty list");
  const Tensor &first = items.front();
  Tensor out(static_cast<int>(items.size()), first.c, first.h, first.w);
  const std::size_t stride = first.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].n != 1 || !items[i].same_shape(first))
      throw ContractError("stack_batch shape mismatch at item " + std::to_string(i));
    std::copy(items[i].data.begin(), items[i].data.end(), out.data.begin() + i * stride);
  }
  return out;
}

Tensor slice_sample(const Tensor &batch, int index) {
  if (index < 0 || index >= batch.n)
    throw ContractError("slice_sample index " + std::to_string(index) + " out of range");
  Tensor out(1, batch.c, batch.h, batch.w);
  const std::size_t stride = out.size();
  std::copy(batch.data.begin() + index * stride, batch.data.begin() + (index + 1) * stride,
            out.data.begin());
  return out;
}

}  // namespace bas
