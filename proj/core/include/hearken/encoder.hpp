#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hearken/fusion.hpp"
#include "hearken/imagination.hpp"
#include "hearken/nn.hpp"

namespace hearken {

struct LanguageModelConfig {
  int vocab_size = 0;
  int num_classes = 2;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int ffn_hidden = 256;
  int max_len = 32;
  std::uint64_t seed = 0;
};

// Token + learned positional embeddings, a transformer encoder stack, and a
// single linear classifier over the first-position encoding.
class LanguageModel {
 public:
  explicit LanguageModel(const LanguageModelConfig& cfg);
  LanguageModel(const LanguageModelConfig& cfg, ParamRegistry params);

  Graph::NodeId embed_node(Graph& g, const LeafMap& p, const TokenSeq& x) const;
  Graph::NodeId encode_node(Graph& g, const LeafMap& p, Graph::NodeId h) const;
  Graph::NodeId classify_node(Graph& g, const LeafMap& p, Graph::NodeId h) const;  // [1 x C]

  const LanguageModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

 private:
  LanguageModelConfig cfg_;
  EncoderStackConfig stack_cfg_;
  ParamRegistry params_;
};

// Everything §-wise trainable end to end: the language model, the fusion
// module, the audio encoder, and the projector. The detector, generator and
// alignment scorer stay outside on purpose; they are frozen by construction.
struct ModelBundle {
  LanguageModel lm;
  FusionModule fusion;
  ToyAudioEncoder audio_encoder;
  AudioProjector projector;

  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path, const LanguageModelConfig& lm_cfg,
                          const FusionConfig& fus_cfg, const AudioEncoderConfig& enc_cfg,
                          const AudioProjectorConfig& proj_cfg);
  std::uint64_t content_hash() const;
};

struct BundleLeaves {
  LeafMap lm, fusion, audio_encoder, projector;
};
BundleLeaves make_bundle_leaves(Graph& g, const ModelBundle& bundle, bool with_grads);

// embed -> fuse accepted spans -> encoder stack -> classifier logits.
// `dedup` optionally shares audio-encoding nodes between identical clips.
Graph::NodeId build_logits(Graph& g, const ModelBundle& bundle, const BundleLeaves& leaves,
                           const TokenSeq& x, const ImaginationResult& imagination,
                           std::unordered_map<std::uint64_t, Graph::NodeId>* dedup = nullptr,
                           GateTrace* trace = nullptr);

struct ForwardResult {
  std::vector<double> logits;
  GateTrace trace;
};
// Inference-time forward pass; with an empty imagination this equals the
// pure-text pass bit-exactly.
ForwardResult forward(const ModelBundle& bundle, const TokenSeq& x,
                      const ImaginationResult& imagination);

struct TrainExample {
  TokenSeq tokens;
  int label = 0;
  ImaginationResult imagination;
};

struct TrainConfig {
  int epochs = 8;
  int batch_size = 32;
  double lr = 3e-4;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

// Minibatch AdamW over the bundle. Single-threaded reference mode: fixed
// shuffle and update order makes reruns with one seed bit-identical.
std::vector<EpochStats> train_end_to_end(ModelBundle& bundle,
                                         const std::vector<TrainExample>& train_set,
                                         const TrainConfig& cfg);

void write_loss_curve_csv(const std::string& path, const std::vector<EpochStats>& curve,
                          const std::string& split);

}  // namespace hearken
