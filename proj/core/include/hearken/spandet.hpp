#pragma once

#include <cstdint>
#include <vector>

#include "hearken/graph.hpp"
#include "hearken/nn.hpp"
#include "hearken/params.hpp"
#include "hearken/rng.hpp"

namespace hearken {

using TokenSeq = std::vector<int>;

// Inclusive token index range flagged audio-related.
struct Span {
  int start = 0;
  int end = 0;
  bool operator==(const Span&) const = default;
};

// Maximal runs of 1s, sorted by start. Labels must be 0/1.
std::vector<Span> group_spans(const std::vector<int>& labels);
// Inverse of group_spans: spans back to a 0/1 label vector of given length.
std::vector<int> spans_to_labels(const std::vector<Span>& spans, int length);

struct DetectorConfig {
  int vocab_size = 0;
  int d_model = 32;
  int n_heads = 2;
  int n_layers = 2;
  int ffn_hidden = 128;
  int max_len = 32;
  double theta = 0.5;  // decision threshold, in (0,1)
  std::uint64_t seed = 0;
};

// Token-level binary classifier: embedding + positions, a small transformer
// encoder, and a per-token linear head read through a sigmoid.
class DetectorModel {
 public:
  explicit DetectorModel(const DetectorConfig& cfg);
  DetectorModel(const DetectorConfig& cfg, ParamRegistry params);

  // per-token probabilities in (0,1); deterministic given weights
  std::vector<double> predict(const TokenSeq& x) const;
  std::vector<Span> detect(const TokenSeq& x) const;  // group_spans(predict >= theta)

  // pre-sigmoid scores as a graph node, for training
  Graph::NodeId logits_node(Graph& g, const LeafMap& p, const TokenSeq& x) const;

  const DetectorConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

 private:
  DetectorConfig cfg_;
  EncoderStackConfig stack_cfg_;
  ParamRegistry params_;
};

struct LabeledTokenSeq {
  TokenSeq tokens;
  std::vector<int> labels;  // 0/1 per token
};

struct DetectorTrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  // chance of swapping a positive token for a random vocabulary id during
  // training; pushes the classifier onto contextual cues so spans around
  // words it never saw still fire
  double word_dropout = 0.0;
};

// Per-token binary cross-entropy; returns the trained model and, when
// requested, the per-epoch mean loss curve.
DetectorModel train_detector(const std::vector<LabeledTokenSeq>& data, const DetectorConfig& cfg,
                             const DetectorTrainConfig& train_cfg,
                             std::vector<double>* loss_curve = nullptr);

// Token-level F1 of positive labels at the model's theta.
double token_f1(const DetectorModel& model, const std::vector<LabeledTokenSeq>& data);

}  // namespace hearken
