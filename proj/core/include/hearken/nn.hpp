#pragma once

#include <string>

#include "hearken/graph.hpp"
#include "hearken/params.hpp"
#include "hearken/rng.hpp"

namespace hearken {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

struct EncoderStackConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int ffn_hidden = 256;
};

// Parameter initializers; all weights N(0, kInitStd), biases zero, layer
// norm gain one.
void init_linear(ParamRegistry& reg, const std::string& prefix, int in, int out, SeededRng& rng);
void init_layer_norm(ParamRegistry& reg, const std::string& prefix, int d);
void init_attention(ParamRegistry& reg, const std::string& prefix, int d_model, SeededRng& rng);
void init_encoder_stack(ParamRegistry& reg, const std::string& prefix,
                        const EncoderStackConfig& cfg, SeededRng& rng);

// x[.. x in] -> x * W + b
Graph::NodeId linear(Graph& g, const LeafMap& p, const std::string& prefix, Graph::NodeId x);
Graph::NodeId apply_layer_norm(Graph& g, const LeafMap& p, const std::string& prefix,
                               Graph::NodeId x);

// Multi-head softmax attention with 1/sqrt(d_head) scaling. Self-attention
// when kv == q. Queries come from `q` rows, keys/values from `kv` rows.
Graph::NodeId multihead_attention(Graph& g, const LeafMap& p, const std::string& prefix,
                                  Graph::NodeId q, Graph::NodeId kv, int n_heads);

// Post-norm transformer encoder block: LN(x + attn(x)), LN(x + ffn(x)).
Graph::NodeId encoder_layer(Graph& g, const LeafMap& p, const std::string& prefix,
                            Graph::NodeId x, const EncoderStackConfig& cfg);
Graph::NodeId encoder_stack(Graph& g, const LeafMap& p, const std::string& prefix,
                            Graph::NodeId x, const EncoderStackConfig& cfg);

}  // namespace hearken
