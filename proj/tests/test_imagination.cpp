#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "hearken/imagination.hpp"

using namespace hearken;

namespace {

// shared fixture: a 2-concept lexicon, a vocabulary where ids >= 8 are the
// concept words, and a detector trained to spot them
struct Fixture {
  std::vector<std::string> vocab{"the", "of", "a", "is", "than", "sounds", "low", "here",
                                 "objA", "objB"};
  Lexicon lexicon;
  MelConfig mel;
  AlignmentScorer scorer;
  DetectorModel detector;
  ToyAudioEncoder encoder;
  AudioProjector projector;

  Fixture()
      : lexicon(make_fixture_lexicon()),
        scorer(lexicon, mel),
        detector(train_fixture_detector()),
        encoder(make_encoder_cfg()),
        projector(AudioProjectorConfig{.d_audio = 32, .d_model = 24, .seed = 4}) {}

  static Lexicon make_fixture_lexicon() {
    Lexicon lex;
    lex.add({0, {"objA"}, 400.0, 100, false});
    lex.add({1, {"objB"}, 800.0, 101, false});
    return lex;
  }

  static AudioEncoderConfig make_encoder_cfg() {
    AudioEncoderConfig cfg;
    cfg.d_audio = 32;
    cfg.ffn_hidden = 64;
    cfg.t_audio = 4;
    cfg.seed = 3;
    return cfg;
  }

  DetectorModel train_fixture_detector() {
    SeededRng rng(17);
    std::vector<LabeledTokenSeq> data;
    for (int i = 0; i < 80; ++i) {
      LabeledTokenSeq ex;
      const int len = 5 + static_cast<int>(rng.uniform_index(5));
      for (int t = 0; t < len; ++t) {
        const int tok = static_cast<int>(rng.uniform_index(vocab.size()));
        ex.tokens.push_back(tok);
        ex.labels.push_back(tok >= 8 ? 1 : 0);
      }
      data.push_back(std::move(ex));
    }
    DetectorConfig cfg;
    cfg.vocab_size = static_cast<int>(vocab.size());
    cfg.seed = 2;
    DetectorTrainConfig tc;
    tc.epochs = 40;
    tc.seed = 9;
    return train_detector(data, cfg, tc);
  }

  std::vector<std::string> text_of(const TokenSeq& x) const {
    std::vector<std::string> out;
    for (int id : x) out.push_back(vocab[static_cast<std::size_t>(id)]);
    return out;
  }

  GeneratorFn oracle_generator() const {
    GeneratorConfig gen;
    const Lexicon& lex = lexicon;
    return [gen, &lex](const std::vector<std::string>& span, SeededRng& rng) {
      return mock_generate(span, lex, gen, rng);
    };
  }

  ScoreFn real_score() const {
    const AlignmentScorer& s = scorer;
    return [&s](const Waveform& w, const std::vector<std::string>& span) {
      return s.score(w, span);
    };
  }
};

}  // namespace

TEST_CASE("encode_audio: output shape contract") {
  const Fixture fx;
  const Waveform tone = synth_tone(0, fx.lexicon, 1.0, 16000);
  const Tensor feats = encode_audio(tone, fx.encoder, fx.projector, fx.mel);
  CHECK(feats.shape == std::vector<int>{4, 24});
  CHECK(feats.all_finite());

  Waveform brief;
  brief.sample_rate_hz = 16000;
  brief.samples.assign(500, 0.1);  // only one mel frame, fewer than t_audio
  CHECK_THROWS_AS(encode_audio(brief, fx.encoder, fx.projector, fx.mel), std::invalid_argument);
}

TEST_CASE("encode_audio: different concepts produce distinct encodings") {
  const Fixture fx;
  const Tensor a = encode_audio(synth_tone(0, fx.lexicon, 1.0, 16000), fx.encoder, fx.projector,
                                fx.mel);
  const Tensor b = encode_audio(synth_tone(1, fx.lexicon, 1.0, 16000), fx.encoder, fx.projector,
                                fx.mel);
  double dist = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) dist += std::abs(a.data[i] - b.data[i]);
  CHECK(dist > 1e-6);
}

TEST_CASE("encode_audio: gradient w.r.t. encoder and projector weights") {
  Fixture fx;
  const Waveform tone = synth_tone(0, fx.lexicon, 1.0, 16000);
  const MelSpectrogram mel = mel_spectrogram(tone, fx.mel);

  SeededRng rng(23);
  SeededRng wrng(24);
  auto build = [&](Graph& g, const std::vector<LeafMap>& leaves) {
    SeededRng local = wrng;
    const Graph::NodeId out =
        encode_audio_node(g, fx.encoder, leaves[0], fx.projector, leaves[1], mel);
    return hearken::testing::weighted_sum(g, out, local);
  };
  auto rep = hearken::testing::registry_gradcheck(
      {&fx.encoder.params(), &fx.projector.params()}, build, 6, rng);
  CHECK(rep.checked > 50);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("imagine: two-span sentence, both accepted with distinct channels") {
  Fixture fx;
  // "the sounds of objA is than objB" -> spans over tokens 3 and 5
  const TokenSeq x{0, 5, 1, 8, 4, 9};
  RejectionConfig rej{.tau = -1.0, .max_trials = 2};
  SeededRng rng(5);
  const ImaginationResult result =
      imagine(x, fx.text_of(x), fx.detector, fx.oracle_generator(), fx.real_score(), rej,
              fx.encoder, fx.projector, fx.mel, rng);

  REQUIRE(result.spans.size() == 2);
  CHECK(result.spans[0].span == Span{3, 3});
  CHECK(result.spans[1].span == Span{5, 5});
  CHECK(result.accepted_count() == 2);
  for (const auto& s : result.spans) {
    CHECK(s.status == SpanAudioStatus::kAccepted);
    CHECK(s.audio_tokens.shape == std::vector<int>{4, 24});
    CHECK(s.trial_scores.size() == 1);
  }

  // dominant mel channels differ (objA at 400 Hz vs objB at 800 Hz)
  const MelFilterbank fb(fx.mel);
  auto dominant = [&](const MelSpectrogram& mel) {
    std::vector<double> profile(static_cast<std::size_t>(mel.values.cols()), 0.0);
    for (int t = 0; t < mel.values.rows(); ++t) {
      for (int m = 0; m < mel.values.cols(); ++m) {
        profile[static_cast<std::size_t>(m)] += std::exp(mel.values.at(t, m));
      }
    }
    return static_cast<int>(std::max_element(profile.begin(), profile.end()) - profile.begin());
  };
  CHECK(dominant(result.spans[0].mel) == fb.channel_of_hz(400.0));
  CHECK(dominant(result.spans[1].mel) == fb.channel_of_hz(800.0));
  CHECK(result.spans[0].mel_key != result.spans[1].mel_key);
}

TEST_CASE("imagine: no detected spans yields an empty result") {
  Fixture fx;
  const TokenSeq x{0, 1, 2, 3, 4};  // filler only
  RejectionConfig rej{.tau = -1.0, .max_trials = 2};
  SeededRng rng(6);
  const ImaginationResult result =
      imagine(x, fx.text_of(x), fx.detector, fx.oracle_generator(), fx.real_score(), rej,
              fx.encoder, fx.projector, fx.mel, rng);
  CHECK(result.spans.empty());
  CHECK(result.accepted_count() == 0);
}

TEST_CASE("imagine: never-accepting scorer marks every span ignored") {
  Fixture fx;
  const TokenSeq x{0, 8, 2, 9};
  RejectionConfig rej{.tau = 0.5, .max_trials = 3};
  SeededRng rng(7);
  const ScoreFn reject_all = [](const Waveform&, const std::vector<std::string>&) { return 0.0; };
  const ImaginationResult result =
      imagine(x, fx.text_of(x), fx.detector, fx.oracle_generator(), reject_all, rej, fx.encoder,
              fx.projector, fx.mel, rng);
  REQUIRE(result.spans.size() == 2);
  for (const auto& s : result.spans) {
    CHECK(s.status == SpanAudioStatus::kIgnored);
    CHECK(s.trial_scores.size() == 3);  // n recorded scores per span
    CHECK(s.audio_tokens.numel() == 0);
  }
}

TEST_CASE("imagine: generator calls never exceed spans x max_trials") {
  Fixture fx;
  const TokenSeq x{0, 8, 2, 9, 6};
  for (int n : {1, 2, 3}) {
    RejectionConfig rej{.tau = 0.95, .max_trials = n};  // tough threshold forces retries
    int calls = 0;
    GeneratorFn counting = [&fx, &calls](const std::vector<std::string>& span, SeededRng& rng) {
      ++calls;
      GeneratorConfig gen;
      gen.mode = GeneratorMode::kNoisy;
      gen.additive_noise_std = 0.4;
      return mock_generate(span, fx.lexicon, gen, rng);
    };
    SeededRng rng(80 + n);
    const ImaginationResult result = imagine(x, fx.text_of(x), fx.detector, counting,
                                             fx.real_score(), rej, fx.encoder, fx.projector,
                                             fx.mel, rng);
    CHECK(calls <= static_cast<int>(result.spans.size()) * n);
  }
}

TEST_CASE("imagine is deterministic for a fixed seed") {
  Fixture fx;
  const TokenSeq x{0, 8, 4, 9};
  RejectionConfig rej{.tau = 0.2, .max_trials = 2};
  GeneratorConfig gen;
  gen.mode = GeneratorMode::kNoisy;
  gen.wrong_concept_prob = 0.5;
  gen.additive_noise_std = 0.05;
  GeneratorFn noisy = [&fx, gen](const std::vector<std::string>& span, SeededRng& rng) {
    return mock_generate(span, fx.lexicon, gen, rng);
  };
  auto run = [&]() {
    SeededRng rng(99);
    return imagine(x, fx.text_of(x), fx.detector, noisy, fx.real_score(), rej, fx.encoder,
                   fx.projector, fx.mel, rng);
  };
  const ImaginationResult r1 = run();
  const ImaginationResult r2 = run();
  REQUIRE(r1.spans.size() == r2.spans.size());
  for (std::size_t i = 0; i < r1.spans.size(); ++i) {
    CHECK(r1.spans[i].status == r2.spans[i].status);
    CHECK(r1.spans[i].trial_scores == r2.spans[i].trial_scores);
    if (r1.spans[i].status == SpanAudioStatus::kAccepted) {
      CHECK(bitwise_equal(r1.spans[i].audio_tokens, r2.spans[i].audio_tokens));
      CHECK(r1.spans[i].mel_key == r2.spans[i].mel_key);
    }
  }
}

TEST_CASE("imagine propagates generation failures with the span index") {
  Fixture fx;
  const TokenSeq x{0, 8, 2};
  RejectionConfig rej{.tau = -1.0, .max_trials = 1};
  GeneratorFn failing = [](const std::vector<std::string>&, SeededRng&) -> Waveform {
    throw GenerationError("backend unavailable");
  };
  SeededRng rng(3);
  CHECK_THROWS_WITH_AS(imagine(x, fx.text_of(x), fx.detector, failing, fx.real_score(), rej,
                               fx.encoder, fx.projector, fx.mel, rng),
                       doctest::Contains("span #0"), GenerationError);
}

TEST_CASE("imagine_sentence_level: one pseudo-span over all tokens, mixed spectrum") {
  Fixture fx;
  const TokenSeq x{0, 8, 4, 9, 6};
  RejectionConfig rej{.tau = -1.0, .max_trials = 2};
  GeneratorConfig gen;
  gen.mode = GeneratorMode::kSentenceLevel;
  GeneratorFn sentence_gen = [&fx, gen](const std::vector<std::string>& span, SeededRng& rng) {
    return mock_generate(span, fx.lexicon, gen, rng);
  };
  SeededRng rng(11);
  const ImaginationResult result = imagine_sentence_level(
      x, fx.text_of(x), sentence_gen, fx.real_score(), rej, fx.encoder, fx.projector, fx.mel, rng);

  REQUIRE(result.spans.size() == 1);
  CHECK(result.spans[0].span == Span{0, 4});  // covers tokens (0, L-1)
  REQUIRE(result.spans[0].status == SpanAudioStatus::kAccepted);

  // mixed clip carries both fundamentals
  const MelFilterbank fb(fx.mel);
  const MelSpectrogram& mel = result.spans[0].mel;
  std::vector<double> profile(static_cast<std::size_t>(mel.values.cols()), 0.0);
  for (int t = 0; t < mel.values.rows(); ++t) {
    for (int m = 0; m < mel.values.cols(); ++m) {
      profile[static_cast<std::size_t>(m)] += std::exp(mel.values.at(t, m));
    }
  }
  for (double f : {400.0, 800.0}) {
    const int ch = fb.channel_of_hz(f);
    for (int d : {-2, -1, 1, 2}) {
      const int other = ch + d;
      if (other < 0 || other >= mel.values.cols()) continue;
      CHECK(profile[static_cast<std::size_t>(ch)] > profile[static_cast<std::size_t>(other)]);
    }
  }
}

TEST_CASE("imagine_sentence_level: single concept equals the span-level clip") {
  Fixture fx;
  const TokenSeq x{0, 5, 1, 8};
  RejectionConfig rej{.tau = -1.0, .max_trials = 2};
  GeneratorConfig sent;
  sent.mode = GeneratorMode::kSentenceLevel;
  GeneratorFn sentence_gen = [&fx, sent](const std::vector<std::string>& span, SeededRng& rng) {
    return mock_generate(span, fx.lexicon, sent, rng);
  };
  SeededRng rng1(21), rng2(21);
  const ImaginationResult sentence = imagine_sentence_level(
      x, fx.text_of(x), sentence_gen, fx.real_score(), rej, fx.encoder, fx.projector, fx.mel,
      rng1);
  const ImaginationResult spans = imagine(x, fx.text_of(x), fx.detector, fx.oracle_generator(),
                                          fx.real_score(), rej, fx.encoder, fx.projector, fx.mel,
                                          rng2);
  REQUIRE(sentence.accepted_count() == 1);
  REQUIRE(spans.accepted_count() == 1);
  // one resolved source: the mixed clip is the same tone
  CHECK(bitwise_equal(sentence.spans[0].mel.values, spans.spans[0].mel.values));
}

TEST_CASE("imagination leaves frozen components untouched") {
  Fixture fx;
  const std::uint64_t det_hash = fx.detector.params().content_hash();
  const std::uint64_t enc_hash = fx.encoder.params().content_hash();
  const std::uint64_t proj_hash = fx.projector.params().content_hash();
  const std::string scorer_bytes = fx.scorer.serialize();

  const TokenSeq x{0, 8, 4, 9};
  RejectionConfig rej{.tau = -1.0, .max_trials = 2};
  SeededRng rng(31);
  imagine(x, fx.text_of(x), fx.detector, fx.oracle_generator(), fx.real_score(), rej, fx.encoder,
          fx.projector, fx.mel, rng);

  CHECK(fx.detector.params().content_hash() == det_hash);
  CHECK(fx.encoder.params().content_hash() == enc_hash);
  CHECK(fx.projector.params().content_hash() == proj_hash);
  CHECK(fx.scorer.serialize() == scorer_bytes);
}
