#include "hearken/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace hearken {

void init_linear(ParamRegistry& reg, const std::string& prefix, int in, int out, SeededRng& rng) {
  reg.add(prefix + ".w", Tensor::randn({in, out}, rng, kInitStd));
  reg.add(prefix + ".b", Tensor::zeros({out}));
}

void init_layer_norm(ParamRegistry& reg, const std::string& prefix, int d) {
  reg.add(prefix + ".gain", Tensor::full({d}, 1.0));
  reg.add(prefix + ".bias", Tensor::zeros({d}));
}

void init_attention(ParamRegistry& reg, const std::string& prefix, int d_model, SeededRng& rng) {
  init_linear(reg, prefix + ".q", d_model, d_model, rng);
  init_linear(reg, prefix + ".k", d_model, d_model, rng);
  init_linear(reg, prefix + ".v", d_model, d_model, rng);
  init_linear(reg, prefix + ".o", d_model, d_model, rng);
}

void init_encoder_stack(ParamRegistry& reg, const std::string& prefix,
                        const EncoderStackConfig& cfg, SeededRng& rng) {
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    init_attention(reg, lp + ".attn", cfg.d_model, rng);
    init_layer_norm(reg, lp + ".ln1", cfg.d_model);
    init_linear(reg, lp + ".ffn1", cfg.d_model, cfg.ffn_hidden, rng);
    init_linear(reg, lp + ".ffn2", cfg.ffn_hidden, cfg.d_model, rng);
    init_layer_norm(reg, lp + ".ln2", cfg.d_model);
  }
}

Graph::NodeId linear(Graph& g, const LeafMap& p, const std::string& prefix, Graph::NodeId x) {
  return g.add_rowvec(g.matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

Graph::NodeId apply_layer_norm(Graph& g, const LeafMap& p, const std::string& prefix,
                               Graph::NodeId x) {
  return g.layer_norm(x, p[prefix + ".gain"], p[prefix + ".bias"], kLayerNormEps);
}

Graph::NodeId multihead_attention(Graph& g, const LeafMap& p, const std::string& prefix,
                                  Graph::NodeId q, Graph::NodeId kv, int n_heads) {
  const int d_model = g.value(q).cols();
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("attention: d_model " + std::to_string(d_model) +
                                " not divisible by " + std::to_string(n_heads) + " heads");
  }
  const int d_head = d_model / n_heads;
  const Graph::NodeId Q = linear(g, p, prefix + ".q", q);
  const Graph::NodeId K = linear(g, p, prefix + ".k", kv);
  const Graph::NodeId V = linear(g, p, prefix + ".v", kv);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Graph::NodeId> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const int c0 = h * d_head, c1 = (h + 1) * d_head;
    const Graph::NodeId qh = g.slice_cols(Q, c0, c1);
    const Graph::NodeId kh = g.slice_cols(K, c0, c1);
    const Graph::NodeId vh = g.slice_cols(V, c0, c1);
    const Graph::NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
    heads.push_back(g.matmul(g.softmax_rows(scores), vh));
  }
  const Graph::NodeId merged = g.concat_cols(heads);
  return linear(g, p, prefix + ".o", merged);
}

Graph::NodeId encoder_layer(Graph& g, const LeafMap& p, const std::string& prefix,
                            Graph::NodeId x, const EncoderStackConfig& cfg) {
  const Graph::NodeId attn = multihead_attention(g, p, prefix + ".attn", x, x, cfg.n_heads);
  const Graph::NodeId h = apply_layer_norm(g, p, prefix + ".ln1", g.add(x, attn));
  const Graph::NodeId ffn = linear(g, p, prefix + ".ffn2", g.gelu(linear(g, p, prefix + ".ffn1", h)));
  return apply_layer_norm(g, p, prefix + ".ln2", g.add(h, ffn));
}

Graph::NodeId encoder_stack(Graph& g, const LeafMap& p, const std::string& prefix,
                            Graph::NodeId x, const EncoderStackConfig& cfg) {
  Graph::NodeId h = x;
  for (int l = 0; l < cfg.n_layers; ++l) {
    h = encoder_layer(g, p, prefix + ".l" + std::to_string(l), h, cfg);
  }
  return h;
}

}  // namespace hearken
