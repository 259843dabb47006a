#include "hearken/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "hearken/checkpoint.hpp"
#include "hearken/optim.hpp"

namespace hearken {

namespace {

EncoderStackConfig lm_stack(const LanguageModelConfig& cfg) {
  EncoderStackConfig s;
  s.d_model = cfg.d_model;
  s.n_heads = cfg.n_heads;
  s.n_layers = cfg.n_layers;
  s.ffn_hidden = cfg.ffn_hidden;
  return s;
}

ParamRegistry init_lm(const LanguageModelConfig& cfg, const EncoderStackConfig& stack) {
  if (cfg.vocab_size < 1) throw std::invalid_argument("language model: vocab_size must be set");
  if (cfg.num_classes < 2) throw std::invalid_argument("language model: need >= 2 classes");
  SeededRng rng(hash_seed(cfg.seed, 0x1a09));
  ParamRegistry reg;
  reg.add("lm.embed", Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kInitStd));
  reg.add("lm.pos", Tensor::randn({cfg.max_len, cfg.d_model}, rng, kInitStd));
  init_encoder_stack(reg, "lm.enc", stack, rng);
  init_linear(reg, "lm.cls", cfg.d_model, cfg.num_classes, rng);
  return reg;
}

}  // namespace

LanguageModel::LanguageModel(const LanguageModelConfig& cfg)
    : cfg_(cfg), stack_cfg_(lm_stack(cfg)), params_(init_lm(cfg, stack_cfg_)) {}

LanguageModel::LanguageModel(const LanguageModelConfig& cfg, ParamRegistry params)
    : cfg_(cfg), stack_cfg_(lm_stack(cfg)), params_(std::move(params)) {}

Graph::NodeId LanguageModel::embed_node(Graph& g, const LeafMap& p, const TokenSeq& x) const {
  if (x.empty()) throw std::invalid_argument("language model: empty token sequence");
  if (static_cast<int>(x.size()) > cfg_.max_len) {
    throw std::invalid_argument("language model: sequence of " + std::to_string(x.size()) +
                                " tokens exceeds max_len " + std::to_string(cfg_.max_len));
  }
  const Graph::NodeId tok = g.gather_rows(p["lm.embed"], x);
  const Graph::NodeId pos = g.slice_rows(p["lm.pos"], 0, static_cast<int>(x.size()));
  return g.add(tok, pos);
}

Graph::NodeId LanguageModel::encode_node(Graph& g, const LeafMap& p, Graph::NodeId h) const {
  return encoder_stack(g, p, "lm.enc", h, stack_cfg_);
}

Graph::NodeId LanguageModel::classify_node(Graph& g, const LeafMap& p, Graph::NodeId h) const {
  return linear(g, p, "lm.cls", g.slice_rows(h, 0, 1));
}

void ModelBundle::save(const std::string& path) const {
  // the four registries use disjoint name prefixes; store them as one file
  ParamRegistry merged;
  for (const ParamRegistry* reg :
       {&lm.params(), &fusion.params(), &audio_encoder.params(), &projector.params()}) {
    for (const auto& e : reg->entries()) merged.add(e.name, e.value, e.trainable);
  }
  save_checkpoint(path, merged);
}

ModelBundle ModelBundle::load(const std::string& path, const LanguageModelConfig& lm_cfg,
                              const FusionConfig& fus_cfg, const AudioEncoderConfig& enc_cfg,
                              const AudioProjectorConfig& proj_cfg) {
  const ParamRegistry merged = load_checkpoint(path);
  ParamRegistry lm_reg, fus_reg, enc_reg, proj_reg;
  for (const auto& e : merged.entries()) {
    if (e.name.rfind("lm.", 0) == 0) lm_reg.add(e.name, e.value, e.trainable);
    else if (e.name.rfind("fus.", 0) == 0) fus_reg.add(e.name, e.value, e.trainable);
    else if (e.name.rfind("aenc.", 0) == 0) enc_reg.add(e.name, e.value, e.trainable);
    else if (e.name.rfind("proj.", 0) == 0) proj_reg.add(e.name, e.value, e.trainable);
    else throw std::runtime_error("bundle checkpoint: unexpected parameter " + e.name);
  }
  return ModelBundle{LanguageModel(lm_cfg, std::move(lm_reg)),
                     FusionModule(fus_cfg, std::move(fus_reg)),
                     ToyAudioEncoder(enc_cfg, std::move(enc_reg)),
                     AudioProjector(proj_cfg, std::move(proj_reg))};
}

std::uint64_t ModelBundle::content_hash() const {
  return lm.params().content_hash() ^ (fusion.params().content_hash() * 3) ^
         (audio_encoder.params().content_hash() * 5) ^ (projector.params().content_hash() * 7);
}

BundleLeaves make_bundle_leaves(Graph& g, const ModelBundle& bundle, bool with_grads) {
  return BundleLeaves{LeafMap(g, bundle.lm.params(), with_grads),
                      LeafMap(g, bundle.fusion.params(), with_grads),
                      LeafMap(g, bundle.audio_encoder.params(), with_grads),
                      LeafMap(g, bundle.projector.params(), with_grads)};
}

Graph::NodeId build_logits(Graph& g, const ModelBundle& bundle, const BundleLeaves& leaves,
                           const TokenSeq& x, const ImaginationResult& imagination,
                           std::unordered_map<std::uint64_t, Graph::NodeId>* dedup,
                           GateTrace* trace) {
  const Graph::NodeId embedded = bundle.lm.embed_node(g, leaves.lm, x);
  Graph::NodeId fused = embedded;
  if (imagination.accepted_count() > 0) {
    const std::vector<AudioSpanNode> audio =
        audio_span_nodes(g, imagination, bundle.audio_encoder, leaves.audio_encoder,
                         bundle.projector, leaves.projector, dedup);
    auto result = bundle.fusion.fuse(g, leaves.fusion, embedded, audio);
    fused = result.output;
    if (trace) *trace = std::move(result.trace);
  } else if (trace) {
    trace->mean_gate.assign(x.size(), 1.0);
  }
  return bundle.lm.classify_node(g, leaves.lm, bundle.lm.encode_node(g, leaves.lm, fused));
}

ForwardResult forward(const ModelBundle& bundle, const TokenSeq& x,
                      const ImaginationResult& imagination) {
  Graph g;
  const BundleLeaves leaves = make_bundle_leaves(g, bundle, /*with_grads=*/false);
  ForwardResult out;
  const Graph::NodeId logits = build_logits(g, bundle, leaves, x, imagination, nullptr, &out.trace);
  out.logits = g.value(logits).data;
  return out;
}

std::vector<EpochStats> train_end_to_end(ModelBundle& bundle,
                                         const std::vector<TrainExample>& train_set,
                                         const TrainConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("train_end_to_end: empty training set");
  AdamW opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  SeededRng shuffle_rng(hash_seed(cfg.seed, 0xe2e));

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochStats> curve;
  curve.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double total_loss = 0.0;
    long correct = 0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      Graph g;
      const BundleLeaves leaves = make_bundle_leaves(g, bundle, /*with_grads=*/true);
      std::unordered_map<std::uint64_t, Graph::NodeId> dedup;
      std::vector<Graph::NodeId> losses;
      const std::size_t stop = std::min(order.size(), at + cfg.batch_size);
      for (std::size_t i = at; i < stop; ++i) {
        const TrainExample& ex = train_set[order[i]];
        const Graph::NodeId logits =
            build_logits(g, bundle, leaves, ex.tokens, ex.imagination, &dedup);
        losses.push_back(g.cross_entropy(logits, {ex.label}));
        const Tensor& lv = g.value(logits);
        int argmax = 0;
        for (int c = 1; c < lv.cols(); ++c) {
          if (lv.at(0, c) > lv.at(0, argmax)) argmax = c;
        }
        correct += argmax == ex.label;
      }
      const Graph::NodeId loss = g.scale(g.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      g.backward(loss);
      opt.step(g, {{&bundle.lm.params(), &leaves.lm},
                   {&bundle.fusion.params(), &leaves.fusion},
                   {&bundle.audio_encoder.params(), &leaves.audio_encoder},
                   {&bundle.projector.params(), &leaves.projector}});
      total_loss += g.value(loss).data[0];
      ++batches;
    }
    curve.push_back({epoch, total_loss / static_cast<double>(batches),
                     static_cast<double>(correct) / static_cast<double>(train_set.size())});
  }
  return curve;
}

void write_loss_curve_csv(const std::string& path, const std::vector<EpochStats>& curve,
                          const std::string& split) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("loss curve: cannot write " + path);
  out << "epoch,split,loss,accuracy\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << split << ',' << e.loss << ',' << e.accuracy << '\n';
  }
}

}  // namespace hearken
