#include "bas/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "bas/errors.hpp"
#include "bas/numeric.hpp"
#include "bas/rng.hpp"

namespace bas {

std::vector<std::string> BackboneSpec::stage_names() const {
  std::vector<std::string> names;
  for (int i = 1; i <= num_stages(); ++i) names.push_back("stage" + std::to_string(i));
  return names;
}

int BackboneSpec::split_index() const {
  const auto names = stage_names();
  for (int i = 0; i + 1 < num_stages(); ++i) {
    if (names[i] == split_point) return i + 1;
  }
  std::ostringstream os;
  os << "unknown split_point '" << split_point << "'; valid names:";
  for (int i = 0; i + 1 < num_stages(); ++i) os << " " << names[i];
  throw ConfigError(os.str());
}

BackboneSpec BASModel::validate(BackboneSpec spec) {
  if (spec.num_stages() < 2) throw ConfigError("backbone needs at least two stages");
  for (int w : spec.widths)
    if (w <= 0) throw ConfigError("stage widths must be positive");
  if (spec.num_categories < 2) throw ConfigError("num_categories must be >= 2");
  spec.split_index();  // throws on bad split name
  return spec;
}

namespace {

std::unique_ptr<Param> make_conv_weight(const std::string &name, int co, int ci, int k, Rng &rng) {
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(co, ci, k, k);
  const double stddev = std::sqrt(2.0 / (ci * k * k));
  for (double &v : p->value.data) v = rng.normal(0.0, stddev);
  p->grad = Tensor::zeros(co, ci, k, k);
  return p;
}

std::unique_ptr<Param> make_conv_bias(const std::string &name, int co) {
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor::zeros(co, 1, 1, 1);
  p->grad = Tensor::zeros(co, 1, 1, 1);
  return p;
}

}  // namespace

BASModel::BASModel(BackboneSpec spec, std::uint64_t seed) : spec_(validate(std::move(spec))) {
  Rng rng(mix64(seed, 0x6261736d6f64656cULL));
  int in_ch = 3;
  for (int s = 0; s < spec_.num_stages(); ++s) {
    const int width = spec_.widths[s];
    for (int b = 0; b < 2; ++b) {
      const std::string base = "stage" + std::to_string(s + 1) + ".conv" + std::to_string(b + 1);
      params_.push_back(make_conv_weight(base + ".weight", width, in_ch, 3, rng));
      params_.push_back(make_conv_bias(base + ".bias", width));
      in_ch = width;
    }
  }
  classifier_first_ = static_cast<int>(params_.size());
  params_.push_back(
      make_conv_weight("classifier.weight", spec_.num_categories, spec_.widths.back(), 1, rng));
  params_.push_back(make_conv_bias("classifier.bias", spec_.num_categories));

  generator_first_ = static_cast<int>(params_.size());
  params_.push_back(make_conv_weight("generator.weight", spec_.num_categories,
                                     spec_.channels_at_split(), 3, rng));
  params_.push_back(make_conv_bias("generator.bias", spec_.num_categories));

  split_param_count_ = spec_.split_index() * 4;  // two convs per stage, two params per conv
}

std::vector<Param *> BASModel::params() {
  std::vector<Param *> out;
  for (auto &p : params_) out.push_back(p.get());
  return out;
}

std::vector<Param *> BASModel::extractor_params() {
  std::vector<Param *> out;
  for (int i = 0; i < split_param_count_; ++i) out.push_back(params_[i].get());
  return out;
}

std::vector<Param *> BASModel::head_params() {
  std::vector<Param *> out;
  for (int i = split_param_count_; i < generator_first_; ++i) out.push_back(params_[i].get());
  return out;
}

std::vector<Param *> BASModel::generator_params() {
  std::vector<Param *> out;
  for (int i = generator_first_; i < static_cast<int>(params_.size()); ++i)
    out.push_back(params_[i].get());
  return out;
}

Param *BASModel::find_param(const std::string &name) {
  for (auto &p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

ValueId BASModel::run_stages(Graph &g, ValueId x, int first_stage, int last_stage,
                             bool param_grads) {
  ValueId cur = x;
  for (int s = first_stage; s < last_stage; ++s) {
    for (int b = 0; b < 2; ++b) {
      const int pi = (s * 2 + b) * 2;
      cur = g.conv2d(cur, p(pi), p(pi + 1), 1, 1, param_grads);
      cur = g.relu(cur);
    }
    cur = g.maxpool2(cur);
  }
  return cur;
}

ValueId BASModel::extract(Graph &g, ValueId images, bool param_grads) {
  const Tensor &in = g.value(images);
  if (in.c != 3) throw ContractError("extract expects (n,3,H,W), got " + in.shape_str());
  return run_stages(g, images, 0, spec_.split_index(), param_grads);
}

ValueId BASModel::generate_maps(Graph &g, ValueId feature, bool param_grads) {
  ValueId pre = g.conv2d(feature, p(generator_first_), p(generator_first_ + 1), 1, 1, param_grads);
  return g.sigmoid(pre);
}

ValueId BASModel::head(Graph &g, ValueId x, bool param_grads) {
  ValueId cur = run_stages(g, x, spec_.split_index(), spec_.num_stages(), param_grads);
  return g.conv2d(cur, p(classifier_first_), p(classifier_first_ + 1), 1, 0, param_grads);
}

AMCValues BASModel::amc_forward(Graph &g, ValueId images, const std::vector<int> &labels) {
  for (int lab : labels)
    if (lab < 0 || lab >= spec_.num_categories) throw ContractError("label out of range");

  AMCValues out;
  out.feature = extract(g, images);
  out.maps = generate_maps(g, out.feature);
  out.map_fg = g.select_map(out.maps, labels);
  out.map_bg = g.one_minus(out.map_fg);
  const ValueId feature_bg = g.mul_mask(out.feature, out.map_bg);

  const ValueId head_full = head(g, out.feature, /*param_grads=*/true);
  const ValueId head_bg = head(g, feature_bg, /*param_grads=*/false);

  out.logits = g.global_avg_pool(head_full);
  out.logits_bg = g.global_avg_pool(head_bg);

  const Tensor &hv = g.value(head_full);
  const ValueId map_fg_small = g.bilinear_resize(out.map_fg, hv.h, hv.w);
  out.logits_fg = g.global_avg_pool(g.mul_mask(head_full, map_fg_small));

  out.score = g.pick(out.logits, labels);
  out.score_bg = g.pick(out.logits_bg, labels);

  for (const ValueId id : {out.logits, out.logits_bg, out.logits_fg}) {
    const Tensor &t = g.value(id);
    for (int n = 0; n < t.n; ++n) {
      for (int c = 0; c < t.c; ++c) {
        if (!std::isfinite(t.at(n, c, 0, 0)))
          throw NumericError("non-finite activation at batch index " + std::to_string(n));
      }
    }
  }
  return out;
}

BASModel::EvalForward BASModel::forward_eval(const Tensor &images) {
  Graph g;
  const ValueId in = g.constant(images);
  const ValueId feature = extract(g, in, /*param_grads=*/false);
  const ValueId maps = generate_maps(g, feature, /*param_grads=*/false);
  const ValueId logits = g.global_avg_pool(head(g, feature, /*param_grads=*/false));
  return {g.value(maps), g.value(logits)};
}

std::uint64_t BASModel::param_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &p : params_) {
    for (double v : p->value.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      h ^= bits;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace bas
