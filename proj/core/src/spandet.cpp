#include "hearken/spandet.hpp"

#include <stdexcept>

#include "hearken/optim.hpp"

namespace hearken {

std::vector<Span> group_spans(const std::vector<int>& labels) {
  for (int v : labels) {
    if (v != 0 && v != 1) throw std::invalid_argument("group_spans: labels must be 0 or 1");
  }
  std::vector<Span> spans;
  const int n = static_cast<int>(labels.size());
  int start = -1;
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) {
      if (start < 0) start = i;
    } else if (start >= 0) {
      spans.push_back({start, i - 1});
      start = -1;
    }
  }
  if (start >= 0) spans.push_back({start, n - 1});
  return spans;
}

std::vector<int> spans_to_labels(const std::vector<Span>& spans, int length) {
  std::vector<int> labels(static_cast<std::size_t>(length), 0);
  for (const Span& s : spans) {
    if (s.start < 0 || s.end >= length || s.start > s.end) {
      throw std::out_of_range("spans_to_labels: span out of range");
    }
    for (int i = s.start; i <= s.end; ++i) labels[static_cast<std::size_t>(i)] = 1;
  }
  return labels;
}

namespace {

ParamRegistry init_detector_params(const DetectorConfig& cfg, const EncoderStackConfig& stack) {
  if (cfg.vocab_size < 1) throw std::invalid_argument("detector: vocab_size must be set");
  if (cfg.theta <= 0.0 || cfg.theta >= 1.0) {
    throw std::invalid_argument("detector: theta must lie in (0,1)");
  }
  SeededRng rng(hash_seed(cfg.seed, 0xde7));
  ParamRegistry reg;
  reg.add("det.embed", Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kInitStd));
  reg.add("det.pos", Tensor::randn({cfg.max_len, cfg.d_model}, rng, kInitStd));
  init_encoder_stack(reg, "det.enc", stack, rng);
  init_linear(reg, "det.head", cfg.d_model, 1, rng);
  return reg;
}

EncoderStackConfig detector_stack(const DetectorConfig& cfg) {
  EncoderStackConfig s;
  s.d_model = cfg.d_model;
  s.n_heads = cfg.n_heads;
  s.n_layers = cfg.n_layers;
  s.ffn_hidden = cfg.ffn_hidden;
  return s;
}

}  // namespace

DetectorModel::DetectorModel(const DetectorConfig& cfg)
    : cfg_(cfg), stack_cfg_(detector_stack(cfg)), params_(init_detector_params(cfg, stack_cfg_)) {}

DetectorModel::DetectorModel(const DetectorConfig& cfg, ParamRegistry params)
    : cfg_(cfg), stack_cfg_(detector_stack(cfg)), params_(std::move(params)) {}

Graph::NodeId DetectorModel::logits_node(Graph& g, const LeafMap& p, const TokenSeq& x) const {
  if (x.empty()) throw std::invalid_argument("detector: empty token sequence");
  if (static_cast<int>(x.size()) > cfg_.max_len) {
    throw std::invalid_argument("detector: sequence of " + std::to_string(x.size()) +
                                " tokens exceeds max_len " + std::to_string(cfg_.max_len));
  }
  const int L = static_cast<int>(x.size());
  const Graph::NodeId tok = g.gather_rows(p["det.embed"], x);
  const Graph::NodeId pos = g.slice_rows(p["det.pos"], 0, L);
  const Graph::NodeId h = encoder_stack(g, p, "det.enc", g.add(tok, pos), stack_cfg_);
  return linear(g, p, "det.head", h);  // [L x 1]
}

std::vector<double> DetectorModel::predict(const TokenSeq& x) const {
  Graph g;
  const LeafMap p(g, params_, /*with_grads=*/false);
  const Graph::NodeId probs = g.sigmoid(logits_node(g, p, x));
  return g.value(probs).data;
}

std::vector<Span> DetectorModel::detect(const TokenSeq& x) const {
  const std::vector<double> probs = predict(x);
  std::vector<int> labels(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) labels[i] = probs[i] >= cfg_.theta ? 1 : 0;
  return group_spans(labels);
}

DetectorModel train_detector(const std::vector<LabeledTokenSeq>& data, const DetectorConfig& cfg,
                             const DetectorTrainConfig& train_cfg,
                             std::vector<double>* loss_curve) {
  if (data.empty()) throw std::invalid_argument("train_detector: empty dataset");
  for (const auto& ex : data) {
    if (ex.tokens.size() != ex.labels.size()) {
      throw std::invalid_argument("train_detector: token/label length mismatch");
    }
  }
  DetectorModel model(cfg);
  AdamW opt({.lr = train_cfg.lr, .weight_decay = train_cfg.weight_decay});
  SeededRng shuffle_rng(hash_seed(train_cfg.seed, 0x5d));
  SeededRng dropout_rng(hash_seed(train_cfg.seed, 0xd0));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += train_cfg.batch_size) {
      Graph g;
      const LeafMap p(g, model.params(), /*with_grads=*/true);
      std::vector<Graph::NodeId> losses;
      const std::size_t stop = std::min(order.size(), at + train_cfg.batch_size);
      for (std::size_t i = at; i < stop; ++i) {
        const auto& ex = data[order[i]];
        TokenSeq tokens = ex.tokens;
        if (train_cfg.word_dropout > 0.0) {
          for (std::size_t t = 0; t < tokens.size(); ++t) {
            if (ex.labels[t] == 1 && dropout_rng.bernoulli(train_cfg.word_dropout)) {
              tokens[t] = static_cast<int>(
                  dropout_rng.uniform_index(static_cast<std::uint64_t>(cfg.vocab_size)));
            }
          }
        }
        const Graph::NodeId logits = model.logits_node(g, p, tokens);
        std::vector<double> targets(ex.labels.begin(), ex.labels.end());
        losses.push_back(g.bce_with_logits(logits, targets));
      }
      const Graph::NodeId loss = g.scale(g.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      g.backward(loss);
      opt.step(g, {{&model.params(), &p}});
      epoch_loss += g.value(loss).data[0];
      ++batches;
    }
    if (loss_curve) loss_curve->push_back(epoch_loss / static_cast<double>(batches));
  }
  return model;
}

double token_f1(const DetectorModel& model, const std::vector<LabeledTokenSeq>& data) {
  long tp = 0, fp = 0, fn = 0;
  for (const auto& ex : data) {
    const std::vector<double> probs = model.predict(ex.tokens);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const bool pred = probs[i] >= model.config().theta;
      const bool gold = ex.labels[i] == 1;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / (tp + fp);
  const double recall = static_cast<double>(tp) / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace hearken
