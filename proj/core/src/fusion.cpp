#include "hearken/fusion.hpp"

#include <stdexcept>
#include <unordered_map>

namespace hearken {

namespace {

ParamRegistry init_fusion(const FusionConfig& cfg) {
  SeededRng rng(hash_seed(cfg.seed, 0xf051));
  ParamRegistry reg;
  init_attention(reg, "fus.attn", cfg.d_model, rng);
  init_linear(reg, "fus.ffn1", cfg.d_model, cfg.ffn_hidden, rng);
  init_linear(reg, "fus.ffn2", cfg.ffn_hidden, cfg.d_model, rng);
  reg.add("fus.gate.w1", Tensor::randn({cfg.d_model, cfg.d_model}, rng, kInitStd));
  reg.add("fus.gate.b1", Tensor::zeros({cfg.d_model}));
  reg.add("fus.gate.w2", Tensor::randn({cfg.d_model, cfg.d_model}, rng, kInitStd));
  reg.add("fus.gate.b2", Tensor::zeros({cfg.d_model}));
  return reg;
}

void check_spans(const std::vector<Span>& spans, int length) {
  int prev_end = -1;
  for (const Span& s : spans) {
    if (s.start < 0 || s.end >= length || s.start > s.end) {
      throw std::out_of_range("fusion: span [" + std::to_string(s.start) + ", " +
                              std::to_string(s.end) + "] outside sequence of length " +
                              std::to_string(length));
    }
    if (s.start <= prev_end) {
      throw std::invalid_argument("fusion: spans must be sorted and disjoint");
    }
    prev_end = s.end;
  }
}

}  // namespace

FusionModule::FusionModule(const FusionConfig& cfg) : cfg_(cfg), params_(init_fusion(cfg)) {}

FusionModule::FusionModule(const FusionConfig& cfg, ParamRegistry params)
    : cfg_(cfg), params_(std::move(params)) {}

Graph::NodeId FusionModule::fusion_attention(Graph& g, const LeafMap& p, Graph::NodeId x,
                                             const std::vector<AudioSpanNode>& audio_spans) const {
  if (audio_spans.empty()) return x;
  std::vector<Span> spans;
  spans.reserve(audio_spans.size());
  for (const auto& [span, node] : audio_spans) spans.push_back(span);
  check_spans(spans, g.value(x).rows());

  Graph::NodeId out = x;
  for (const auto& [span, audio] : audio_spans) {
    const Graph::NodeId rows = g.slice_rows(x, span.start, span.end + 1);
    const Graph::NodeId attended =
        multihead_attention(g, p, "fus.attn", rows, audio, cfg_.n_heads);
    out = g.paste_rows(out, attended, span.start);
  }
  return out;
}

Graph::NodeId FusionModule::ffn(Graph& g, const LeafMap& p, Graph::NodeId z,
                                const std::vector<Span>& touched) const {
  check_spans(touched, g.value(z).rows());
  Graph::NodeId out = z;
  for (const Span& span : touched) {
    const Graph::NodeId rows = g.slice_rows(z, span.start, span.end + 1);
    const Graph::NodeId h = linear(g, p, "fus.ffn2", g.gelu(linear(g, p, "fus.ffn1", rows)));
    out = g.paste_rows(out, h, span.start);
  }
  return out;
}

std::pair<Graph::NodeId, GateTrace> FusionModule::fusion_gate(
    Graph& g, const LeafMap& p, Graph::NodeId x, Graph::NodeId z_ffn,
    const std::vector<Span>& touched) const {
  if (!g.value(x).same_shape(g.value(z_ffn))) {
    throw std::invalid_argument("fusion_gate: x and z_ffn shapes differ");
  }
  const int length = g.value(x).rows();
  check_spans(touched, length);

  GateTrace trace;
  trace.mean_gate.assign(static_cast<std::size_t>(length), 1.0);  // bypassed rows: all text

  Graph::NodeId out = x;
  for (const Span& span : touched) {
    const Graph::NodeId x_rows = g.slice_rows(x, span.start, span.end + 1);
    const Graph::NodeId z_rows = g.slice_rows(z_ffn, span.start, span.end + 1);
    Graph::NodeId fused_rows;
    if (cfg_.use_gate) {
      const Graph::NodeId pre =
          g.add(g.add_rowvec(g.matmul(x_rows, p["fus.gate.w1"]), p["fus.gate.b1"]),
                g.add_rowvec(g.matmul(z_rows, p["fus.gate.w2"]), p["fus.gate.b2"]));
      const Graph::NodeId gate = g.sigmoid(pre);
      fused_rows = g.add(g.mul(gate, x_rows), g.mul(g.one_minus(gate), z_rows));
      const Tensor& gv = g.value(gate);
      for (int r = 0; r < gv.rows(); ++r) {
        double mean = 0.0;
        for (int c = 0; c < gv.cols(); ++c) mean += gv.at(r, c);
        trace.mean_gate[static_cast<std::size_t>(span.start + r)] = mean / gv.cols();
      }
    } else {
      // gate ablation: audio-informed features pass straight through
      fused_rows = z_rows;
      for (int r = span.start; r <= span.end; ++r) {
        trace.mean_gate[static_cast<std::size_t>(r)] = 0.0;
      }
    }
    out = g.paste_rows(out, fused_rows, span.start);
  }
  return {out, std::move(trace)};
}

FusionModule::Fused FusionModule::fuse(Graph& g, const LeafMap& p, Graph::NodeId x,
                                       const std::vector<AudioSpanNode>& audio_spans) const {
  if (audio_spans.empty()) {
    GateTrace trace;
    trace.mean_gate.assign(static_cast<std::size_t>(g.value(x).rows()), 1.0);
    return {x, std::move(trace)};
  }
  std::vector<Span> touched;
  touched.reserve(audio_spans.size());
  for (const auto& [span, node] : audio_spans) touched.push_back(span);

  const Graph::NodeId attended = fusion_attention(g, p, x, audio_spans);
  const Graph::NodeId z_ffn = ffn(g, p, attended, touched);
  auto [fused, trace] = fusion_gate(g, p, x, z_ffn, touched);
  return {fused, std::move(trace)};
}

std::vector<AudioSpanNode> audio_span_nodes(
    Graph& g, const ImaginationResult& imagination, const ToyAudioEncoder& enc,
    const LeafMap& enc_leaves, const AudioProjector& proj, const LeafMap& proj_leaves,
    std::unordered_map<std::uint64_t, Graph::NodeId>* dedup) {
  std::vector<AudioSpanNode> out;
  for (const auto& s : imagination.spans) {
    if (s.status != SpanAudioStatus::kAccepted) continue;
    if (dedup) {
      auto it = dedup->find(s.mel_key);
      if (it != dedup->end()) {
        out.emplace_back(s.span, it->second);
        continue;
      }
    }
    const Graph::NodeId node = encode_audio_node(g, enc, enc_leaves, proj, proj_leaves, s.mel);
    if (dedup) (*dedup)[s.mel_key] = node;
    out.emplace_back(s.span, node);
  }
  return out;
}

}  // namespace hearken
