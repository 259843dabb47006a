#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hearken/imagination.hpp"
#include "hearken/nn.hpp"
#include "hearken/spandet.hpp"

namespace hearken {

struct FusionConfig {
  int d_model = 64;
  int n_heads = 4;
  int ffn_hidden = 256;
  bool use_gate = true;  // false: z_fused = z_ffn on touched rows (gate ablation)
  std::uint64_t seed = 0;
};

// Mean gate activation per sequence position; bypassed rows report 1.0
// (all text, no audio).
struct GateTrace {
  std::vector<double> mean_gate;
};

// One accepted span and its audio token matrix in the current graph.
using AudioSpanNode = std::pair<Span, Graph::NodeId>;

// Span-restricted cross-attention, a two-layer FFN over the attended rows,
// and a sigmoid fusion gate combining each touched row with its original
// embedding. Rows outside every accepted span pass through bit-exact.
class FusionModule {
 public:
  explicit FusionModule(const FusionConfig& cfg);
  FusionModule(const FusionConfig& cfg, ParamRegistry params);

  // queries from span rows only, keys/values from that span's audio tokens
  Graph::NodeId fusion_attention(Graph& g, const LeafMap& p, Graph::NodeId x,
                                 const std::vector<AudioSpanNode>& audio_spans) const;
  // two-layer MLP on the rows the attention touched; other rows unchanged
  Graph::NodeId ffn(Graph& g, const LeafMap& p, Graph::NodeId z,
                    const std::vector<Span>& touched) const;
  // g = sigmoid((W1 x + b1) + (W2 z_ffn + b2)); z_fused = g*x + (1-g)*z_ffn
  // applied on touched rows; returns the fused matrix and the gate trace
  std::pair<Graph::NodeId, GateTrace> fusion_gate(Graph& g, const LeafMap& p, Graph::NodeId x,
                                                  Graph::NodeId z_ffn,
                                                  const std::vector<Span>& touched) const;

  struct Fused {
    Graph::NodeId output;
    GateTrace trace;
  };
  // attention + ffn + gate; identity map when audio_spans is empty
  Fused fuse(Graph& g, const LeafMap& p, Graph::NodeId x,
             const std::vector<AudioSpanNode>& audio_spans) const;

  const FusionConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

 private:
  FusionConfig cfg_;
  ParamRegistry params_;
};

// Accepted spans of an imagination result, paired with freshly built audio
// encoding nodes. `dedup` shares one encoding node between spans whose mel
// content hashes agree (training-step optimization; identical values either
// way).
std::vector<AudioSpanNode> audio_span_nodes(Graph& g, const ImaginationResult& imagination,
                                            const ToyAudioEncoder& enc, const LeafMap& enc_leaves,
                                            const AudioProjector& proj, const LeafMap& proj_leaves,
                                            std::unordered_map<std::uint64_t, Graph::NodeId>* dedup);

}  // namespace hearken
