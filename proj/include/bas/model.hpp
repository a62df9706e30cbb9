#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bas/graph.hpp"
#include "bas/tensor.hpp"

namespace bas {

/// Staged convolutional backbone description. Each stage is two 3x3
/// conv+relu blocks followed by a 2x max-pool; the split point names the
/// last stage of the extractor, everything after it forms the head.
struct BackboneSpec {
  std::vector<int> widths{32, 64, 128, 256};
  std::string split_point = "stage3";
  int num_categories = 0;

  int num_stages() const { return static_cast<int>(widths.size()); }
  std::vector<std::string> stage_names() const;
  /// Number of extractor stages (1-based index of the split stage).
  /// Throws ConfigError listing valid names when split_point is unknown.
  int split_index() const;
  /// Cumulative downsampling factor of the extractor.
  int stride_at_split() const { return 1 << split_index(); }
  int channels_at_split() const { return widths[split_index() - 1]; }
};

/// Quantities produced by one training-mode forward pass of the whole
/// extractor / generator / head wiring, as graph values.
struct AMCValues {
  ValueId feature = -1;     // (n,N,hs,ws)
  ValueId maps = -1;        // (n,C,hs,ws), sigmoid outputs
  ValueId map_fg = -1;      // (n,1,hs,ws)
  ValueId map_bg = -1;      // (n,1,hs,ws), exactly 1 - map_fg
  ValueId logits = -1;      // (n,C,1,1)   pooled head on the full feature
  ValueId logits_bg = -1;   // (n,C,1,1)   pooled head on the masked feature, head frozen
  ValueId logits_fg = -1;   // (n,C,1,1)   pooled foreground-weighted head output
  ValueId score = -1;       // (n,1,1,1)   logits at the target category
  ValueId score_bg = -1;    // (n,1,1,1)
};

class BASModel {
 public:
  BASModel(BackboneSpec spec, std::uint64_t seed);

  const BackboneSpec &spec() const { return spec_; }

  std::vector<Param *> params();
  std::vector<Param *> extractor_params();  // parameters before the split
  std::vector<Param *> head_params();       // parameters after the split + classifier
  std::vector<Param *> generator_params();
  Param *find_param(const std::string &name);

  /// f1: image batch (n,3,H,W) -> feature map at the split point.
  ValueId extract(Graph &g, ValueId images, bool param_grads = true);
  /// Per-category foreground maps: 3x3 conv + logistic squashing.
  ValueId generate_maps(Graph &g, ValueId feature, bool param_grads = true);
  /// f2: feature -> C-channel map before pooling.
  ValueId head(Graph &g, ValueId x, bool param_grads = true);

  /// Full training-mode wiring for a labelled batch. Throws NumericError
  /// naming the first offending batch index if any pooled score is
  /// non-finite.
  AMCValues amc_forward(Graph &g, ValueId images, const std::vector<int> &labels);

  /// Inference-mode forward: prediction maps and pooled class scores.
  struct EvalForward {
    Tensor maps;    // (n,C,hs,ws)
    Tensor logits;  // (n,C,1,1)
  };
  EvalForward forward_eval(const Tensor &images);

  std::uint64_t param_checksum() const;
  static BackboneSpec validate(BackboneSpec spec);

 private:
  BackboneSpec spec_;
  // stage convs in order, then classifier conv, then generator conv;
  // each conv contributes weight+bias params back to back.
  std::vector<std::unique_ptr<Param>> params_;
  int classifier_first_ = 0;  // index of the classifier weight param
  int generator_first_ = 0;   // index of the generator weight param
  int split_param_count_ = 0; // params belonging to the extractor

  Param &p(int i) { return *params_[i]; }
  ValueId run_stages(Graph &g, ValueId x, int first_stage, int last_stage, bool param_grads);
};

}  // namespace bas
