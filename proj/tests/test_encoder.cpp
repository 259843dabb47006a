#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "hearken/encoder.hpp"

using namespace hearken;

namespace {

constexpr int kVocab = 24;

ModelBundle small_bundle(std::uint64_t seed, int num_classes = 2, bool use_gate = true) {
  LanguageModelConfig lm;
  lm.vocab_size = kVocab;
  lm.num_classes = num_classes;
  lm.d_model = 24;
  lm.n_heads = 2;
  lm.n_layers = 2;
  lm.ffn_hidden = 48;
  lm.max_len = 16;
  lm.seed = seed;
  FusionConfig fus;
  fus.d_model = 24;
  fus.n_heads = 2;
  fus.ffn_hidden = 48;
  fus.use_gate = use_gate;
  fus.seed = seed + 1;
  AudioEncoderConfig enc;
  enc.d_audio = 16;
  enc.n_heads = 2;
  enc.ffn_hidden = 32;
  enc.t_audio = 4;
  enc.seed = seed + 2;
  AudioProjectorConfig proj;
  proj.d_audio = 16;
  proj.d_model = 24;
  proj.seed = seed + 3;
  return ModelBundle{LanguageModel(lm), FusionModule(fus), ToyAudioEncoder(enc),
                     AudioProjector(proj)};
}

MelSpectrogram tone_mel(double freq, std::uint64_t timbre) {
  Lexicon lex;
  lex.add({0, {"tone"}, freq, timbre, false});
  return mel_spectrogram(synth_tone(0, lex, 1.0, 16000), MelConfig{});
}

ImaginationResult fake_imagination(const std::vector<std::pair<Span, double>>& spans,
                                   const ModelBundle& bundle) {
  ImaginationResult result;
  std::uint64_t timbre = 7;
  for (const auto& [span, freq] : spans) {
    SpanImagination s;
    s.span = span;
    s.status = SpanAudioStatus::kAccepted;
    s.score = 0.99;
    s.trial_scores = {0.99};
    s.mel = tone_mel(freq, timbre++);
    s.mel_key = timbre * 1000003 + static_cast<std::uint64_t>(freq);
    Graph g;
    const LeafMap ep(g, bundle.audio_encoder.params(), false);
    const LeafMap pp(g, bundle.projector.params(), false);
    s.audio_tokens =
        g.value(encode_audio_node(g, bundle.audio_encoder, ep, bundle.projector, pp, s.mel));
    result.spans.push_back(std::move(s));
  }
  return result;
}

}  // namespace

TEST_CASE("forward: logits shape and determinism") {
  const ModelBundle bundle = small_bundle(1);
  const TokenSeq x{0, 5, 9, 3, 2};
  const ForwardResult r1 = forward(bundle, x, {});
  const ForwardResult r2 = forward(bundle, x, {});
  CHECK(r1.logits.size() == 2);
  CHECK(r1.logits == r2.logits);
  REQUIRE(r1.trace.mean_gate.size() == x.size());
  for (double v : r1.trace.mean_gate) CHECK(v == 1.0);

  CHECK_THROWS_AS(forward(bundle, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(forward(bundle, TokenSeq(20, 1), {}), std::invalid_argument);
}

TEST_CASE("forward with empty imagination equals the pure-text pass bit-exactly") {
  const ModelBundle bundle = small_bundle(2);
  const TokenSeq x{1, 2, 3, 4, 5, 6};

  const ForwardResult fused = forward(bundle, x, {});

  // hand-assembled pure-text pass: embed -> encode -> classify, no fusion
  Graph g;
  const LeafMap p(g, bundle.lm.params(), false);
  const Graph::NodeId logits =
      bundle.lm.classify_node(g, p, bundle.lm.encode_node(g, p, bundle.lm.embed_node(g, p, x)));
  const std::vector<double>& pure = g.value(logits).data;

  REQUIRE(fused.logits.size() == pure.size());
  for (std::size_t i = 0; i < pure.size(); ++i) CHECK(fused.logits[i] == pure[i]);
}

TEST_CASE("forward with an ignored-only imagination also bypasses fusion bit-exactly") {
  const ModelBundle bundle = small_bundle(3);
  const TokenSeq x{1, 2, 3, 4};
  ImaginationResult ignored;
  SpanImagination s;
  s.span = {1, 2};
  s.status = SpanAudioStatus::kIgnored;
  s.trial_scores = {0.1, 0.2};
  ignored.spans.push_back(std::move(s));

  const ForwardResult a = forward(bundle, x, {});
  const ForwardResult b = forward(bundle, x, ignored);
  CHECK(a.logits == b.logits);
}

TEST_CASE("untrained model scores chance on balanced random data") {
  const ModelBundle bundle = small_bundle(4);
  SeededRng rng(44);
  int correct = 0;
  const int n = 600;
  for (int i = 0; i < n; ++i) {
    TokenSeq x;
    const int len = 4 + static_cast<int>(rng.uniform_index(8));
    for (int t = 0; t < len; ++t) x.push_back(static_cast<int>(rng.uniform_index(kVocab)));
    const int label = i % 2;  // balanced
    const ForwardResult r = forward(bundle, x, {});
    const int pred = r.logits[1] > r.logits[0] ? 1 : 0;
    correct += pred == label;
  }
  const double acc = static_cast<double>(correct) / n;
  CHECK(acc >= 0.4);
  CHECK(acc <= 0.6);
}

TEST_CASE("audio injection changes logits; gate trace reflects touched rows") {
  const ModelBundle bundle = small_bundle(5);
  const TokenSeq x{0, 7, 3, 9, 2};
  const ImaginationResult audio = fake_imagination({{Span{1, 1}, 500.0}, {Span{3, 3}, 2000.0}},
                                                   bundle);
  const ForwardResult without = forward(bundle, x, {});
  const ForwardResult with_audio = forward(bundle, x, audio);
  double diff = 0.0;
  for (std::size_t i = 0; i < without.logits.size(); ++i) {
    diff += std::abs(without.logits[i] - with_audio.logits[i]);
  }
  CHECK(diff > 1e-9);
  REQUIRE(with_audio.trace.mean_gate.size() == 5);
  for (std::size_t i : {std::size_t(0), std::size_t(2), std::size_t(4)}) {
    CHECK(with_audio.trace.mean_gate[i] == 1.0);
  }
  for (std::size_t i : {std::size_t(1), std::size_t(3)}) {
    CHECK(with_audio.trace.mean_gate[i] > 0.0);
    CHECK(with_audio.trace.mean_gate[i] < 1.0);
  }
}

TEST_CASE("composed model gradient check: embedding -> fusion -> encoder -> loss") {
  ModelBundle bundle = small_bundle(6);
  const TokenSeq x{0, 7, 3, 9, 2, 11, 4, 1};  // 8 tokens
  const ImaginationResult audio = fake_imagination({{Span{1, 2}, 500.0}, {Span{5, 5}, 1500.0}},
                                                   bundle);
  SeededRng rng(66);
  auto build = [&](Graph& g, const std::vector<LeafMap>& leaves) {
    const BundleLeaves bl{leaves[0], leaves[1], leaves[2], leaves[3]};
    const Graph::NodeId logits = build_logits(g, bundle, bl, x, audio);
    return g.cross_entropy(logits, {1});
  };
  auto rep = hearken::testing::registry_gradcheck(
      {&bundle.lm.params(), &bundle.fusion.params(), &bundle.audio_encoder.params(),
       &bundle.projector.params()},
      build, 4, rng);
  CHECK(rep.checked > 100);
  CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("train_end_to_end: overfits 32 examples within 300 epochs") {
  ModelBundle bundle = small_bundle(7);
  SeededRng rng(70);
  std::vector<TrainExample> train;
  for (int i = 0; i < 32; ++i) {
    TrainExample ex;
    const int len = 6;
    for (int t = 0; t < len; ++t) {
      ex.tokens.push_back(static_cast<int>(rng.uniform_index(kVocab)));
    }
    ex.label = static_cast<int>(rng.uniform_index(2));
    train.push_back(std::move(ex));
  }
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  cfg.seed = 7;
  const std::vector<EpochStats> curve = train_end_to_end(bundle, train, cfg);

  bool reached = false;
  for (const auto& e : curve) reached = reached || e.accuracy == 1.0;
  CHECK(reached);
  CHECK(curve.back().accuracy == 1.0);
  CHECK(curve.back().loss < curve.front().loss);

  CHECK_THROWS_AS(train_end_to_end(bundle, {}, cfg), std::invalid_argument);
}

TEST_CASE("train_end_to_end trains the audio path too") {
  // labels decided solely by the span's audio frequency; text is constant
  ModelBundle bundle = small_bundle(8);
  std::vector<TrainExample> train;
  SeededRng rng(81);
  for (int i = 0; i < 48; ++i) {
    TrainExample ex;
    ex.tokens = {0, 1, 2, 3};
    const bool high = i % 2 == 1;
    ex.label = high ? 1 : 0;
    ex.imagination = fake_imagination({{Span{2, 2}, high ? 1800.0 : 300.0}}, bundle);
    train.push_back(std::move(ex));
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.lr = 1e-3;
  cfg.seed = 3;
  const auto curve = train_end_to_end(bundle, train, cfg);
  CHECK(curve.back().accuracy == 1.0);  // only audio separates the classes
}

TEST_CASE("two training runs with one seed are bit-identical") {
  auto run = [] {
    ModelBundle bundle = small_bundle(9);
    SeededRng rng(90);
    std::vector<TrainExample> train;
    for (int i = 0; i < 24; ++i) {
      TrainExample ex;
      for (int t = 0; t < 5; ++t) ex.tokens.push_back(static_cast<int>(rng.uniform_index(kVocab)));
      ex.label = static_cast<int>(rng.uniform_index(2));
      train.push_back(std::move(ex));
    }
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.seed = 17;
    train_end_to_end(bundle, train, cfg);
    return bundle.content_hash();
  };
  CHECK(run() == run());
}

TEST_CASE("bundle checkpoint round trip is bit-exact") {
  ModelBundle bundle = small_bundle(10);
  const TokenSeq x{0, 5, 9, 3};
  const std::string path = "bundle_test.ckpt";
  bundle.save(path);

  LanguageModelConfig lm_cfg;
  lm_cfg.vocab_size = kVocab;
  lm_cfg.num_classes = 2;
  lm_cfg.d_model = 24;
  lm_cfg.n_heads = 2;
  lm_cfg.n_layers = 2;
  lm_cfg.ffn_hidden = 48;
  lm_cfg.max_len = 16;
  lm_cfg.seed = 10;
  FusionConfig fus_cfg;
  fus_cfg.d_model = 24;
  fus_cfg.n_heads = 2;
  fus_cfg.ffn_hidden = 48;
  fus_cfg.seed = 11;
  AudioEncoderConfig enc_cfg;
  enc_cfg.d_audio = 16;
  enc_cfg.n_heads = 2;
  enc_cfg.ffn_hidden = 32;
  enc_cfg.t_audio = 4;
  enc_cfg.seed = 12;
  AudioProjectorConfig proj_cfg;
  proj_cfg.d_audio = 16;
  proj_cfg.d_model = 24;
  proj_cfg.seed = 13;

  const ModelBundle restored = ModelBundle::load(path, lm_cfg, fus_cfg, enc_cfg, proj_cfg);
  CHECK(restored.content_hash() == bundle.content_hash());
  CHECK(forward(restored, x, {}).logits == forward(bundle, x, {}).logits);
  std::remove(path.c_str());
}
