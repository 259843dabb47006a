#include <cmath>

#include "doctest.h"
#include "hearken/alignment.hpp"

using namespace hearken;

namespace {

Lexicon small_lexicon() {
  Lexicon lex;
  lex.add({0, {"objA"}, 500.0, 21, false});
  lex.add({1, {"objB"}, 1200.0, 22, false});
  lex.add({2, {"objC"}, 2400.0, 23, false});
  return lex;
}

// generator whose clip smuggles a uniform draw in its first sample, scored
// by reading it back; gives an exact per-trial acceptance probability
GeneratorFn coin_generator() {
  return [](const std::vector<std::string>&, SeededRng& rng) {
    Waveform w;
    w.samples = {rng.uniform()};
    return w;
  };
}

ScoreFn read_first_sample() {
  return [](const Waveform& w, const std::vector<std::string>&) { return w.samples[0]; };
}

}  // namespace

TEST_CASE("cosine: fixed points and errors") {
  CHECK(cosine({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == doctest::Approx(1.0));
  CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0));
  CHECK(cosine({1.0, 0.0}, {1.0, 1.0}) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(cosine({0.0, 0.0}, {1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(cosine({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("cosine symmetry and scale invariance") {
  SeededRng rng(17);
  for (int i = 0; i < 50; ++i) {
    EmbeddingVec u(8), v(8);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double c = cosine(u, v);
    CHECK(c >= -1.0 - 1e-12);
    CHECK(c <= 1.0 + 1e-12);
    CHECK(cosine(v, u) == doctest::Approx(c).epsilon(1e-12));
    const double alpha = rng.uniform(0.1, 10.0);
    EmbeddingVec su(u);
    for (auto& x : su) x *= alpha;
    CHECK(cosine(su, v) == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("embed_text: deterministic spectral signatures") {
  const AlignmentScorer scorer(small_lexicon(), MelConfig{});
  const EmbeddingVec a1 = scorer.embed_text({"objA"});
  const EmbeddingVec a2 = scorer.embed_text({"objA"});
  REQUIRE(a1.size() == 32);
  CHECK(a1 == a2);

  double norm = 0.0;
  int peak = 0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    norm += a1[i] * a1[i];
    if (a1[i] > a1[static_cast<std::size_t>(peak)]) peak = static_cast<int>(i);
  }
  CHECK(norm == doctest::Approx(1.0));
  const MelFilterbank fb((MelConfig()));
  CHECK(peak == fb.channel_of_hz(500.0));

  // two concepts embed as the normalized sum of their profiles
  const EmbeddingVec ab = scorer.embed_text({"objA", "objB"});
  const EmbeddingVec b = scorer.embed_text({"objB"});
  EmbeddingVec sum(a1.size());
  double sum_norm = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum[i] = a1[i] + b[i];
    sum_norm += sum[i] * sum[i];
  }
  sum_norm = std::sqrt(sum_norm);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    CHECK(ab[i] == doctest::Approx(sum[i] / sum_norm).epsilon(1e-9));
  }

  CHECK_THROWS_AS(scorer.embed_text({"unknown"}), EmbeddingError);
}

TEST_CASE("embed_audio: oracle clips align with their text spans") {
  const Lexicon lex = small_lexicon();
  const AlignmentScorer scorer(lex, MelConfig{});
  for (const auto& c : lex.concepts()) {
    const Waveform tone = synth_tone(c.id, lex, 1.0, 16000);
    CHECK(scorer.score(tone, c.surface) > 0.95);
  }
}

TEST_CASE("embed_audio: silence gives the uniform profile") {
  const AlignmentScorer scorer(small_lexicon(), MelConfig{});
  Waveform silence;
  silence.sample_rate_hz = 16000;
  silence.samples.assign(16000, 0.0);
  const EmbeddingVec e = scorer.embed_audio(mel_spectrogram(silence, MelConfig{}));
  const double expect = 1.0 / std::sqrt(32.0);
  for (double v : e) CHECK(v == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("embed_audio: white noise scores poorly against a pure tone") {
  const AlignmentScorer scorer(small_lexicon(), MelConfig{});
  int below = 0;
  for (int i = 0; i < 100; ++i) {
    SeededRng rng(9000 + i);
    Waveform noise;
    noise.sample_rate_hz = 16000;
    noise.samples.resize(16000);
    for (auto& v : noise.samples) v = std::clamp(rng.normal(0.0, 0.3), -1.0, 1.0);
    if (scorer.score(noise, {"objA"}) < 0.5) ++below;
  }
  CHECK(below == 100);
}

TEST_CASE("sample_with_rejection: contracts") {
  SeededRng rng(1);
  RejectionConfig cfg{.tau = 0.6, .max_trials = 2};

  int calls = 0;
  GeneratorFn gen = [&calls](const std::vector<std::string>&, SeededRng&) {
    ++calls;
    Waveform w;
    w.samples = {0.0};
    return w;
  };

  // always-accept scorer: first trial wins
  auto r1 = sample_with_rejection({"x"}, gen, [](const Waveform&, const auto&) { return 1.0; },
                                  cfg, rng);
  CHECK(r1.status == SpanAudioStatus::kAccepted);
  CHECK(r1.trial_scores.size() == 1);
  CHECK(calls == 1);

  // never-accept scorer: Ignored with max_trials recorded scores
  calls = 0;
  auto r2 = sample_with_rejection({"x"}, gen, [](const Waveform&, const auto&) { return 0.3; },
                                  cfg, rng);
  CHECK(r2.status == SpanAudioStatus::kIgnored);
  CHECK(r2.trial_scores == std::vector<double>{0.3, 0.3});
  CHECK(calls == 2);

  // tie rejects: score == tau is not acceptance
  calls = 0;
  auto r3 = sample_with_rejection({"x"}, gen, [](const Waveform&, const auto&) { return 0.6; },
                                  cfg, rng);
  CHECK(r3.status == SpanAudioStatus::kIgnored);

  // generator failure propagates
  GeneratorFn boom = [](const std::vector<std::string>&, SeededRng&) -> Waveform {
    throw GenerationError("nothing resolvable");
  };
  CHECK_THROWS_AS(sample_with_rejection({"x"}, boom, read_first_sample(), cfg, rng),
                  GenerationError);
}

TEST_CASE("sample_with_rejection: retention matches the closed form") {
  // per-trial acceptance probability p = 0.5 at tau = 0.5; n = 2
  RejectionConfig cfg{.tau = 0.5, .max_trials = 2};
  const GeneratorFn gen = coin_generator();
  const ScoreFn score = read_first_sample();
  int kept = 0;
  const int spans = 10000;
  for (int i = 0; i < spans; ++i) {
    SeededRng rng(hash_seed(42, static_cast<std::uint64_t>(i)));
    if (sample_with_rejection({"s"}, gen, score, cfg, rng).status == SpanAudioStatus::kAccepted) {
      ++kept;
    }
  }
  const double retention = static_cast<double>(kept) / spans;
  CHECK(retention == doctest::Approx(0.75).epsilon(0.0267));  // 0.75 +- 0.02
  CHECK(std::abs(retention - 0.75) < 0.02);
}

TEST_CASE("sample_with_rejection: retention non-increasing in tau; tau=-1 accepts all") {
  const GeneratorFn gen = coin_generator();
  const ScoreFn score = read_first_sample();
  double prev = 2.0;
  for (double tau : {-1.0, 0.0, 0.3, 0.6, 0.9}) {
    RejectionConfig cfg{.tau = tau, .max_trials = 2};
    int kept = 0;
    const int spans = 2000;
    for (int i = 0; i < spans; ++i) {
      SeededRng rng(hash_seed(7, static_cast<std::uint64_t>(i)));  // fixed seed stream
      if (sample_with_rejection({"s"}, gen, score, cfg, rng).status ==
          SpanAudioStatus::kAccepted) {
        ++kept;
      }
    }
    const double retention = static_cast<double>(kept) / spans;
    if (tau == -1.0) CHECK(retention == 1.0);
    CHECK(retention <= prev);
    prev = retention;
  }
}

TEST_CASE("sample_with_rejection: never exceeds max_trials generator calls") {
  SeededRng meta(55);
  for (int n : {1, 2, 3, 5}) {
    for (int rep = 0; rep < 20; ++rep) {
      int calls = 0;
      GeneratorFn gen = [&calls](const std::vector<std::string>&, SeededRng& r) {
        ++calls;
        Waveform w;
        w.samples = {r.uniform()};
        return w;
      };
      RejectionConfig cfg{.tau = 0.7, .max_trials = n};
      SeededRng rng(meta.next_u64());
      sample_with_rejection({"s"}, gen, read_first_sample(), cfg, rng);
      CHECK(calls <= n);
    }
  }
}

TEST_CASE("scorer serialization is deterministic") {
  const AlignmentScorer s1(small_lexicon(), MelConfig{});
  const AlignmentScorer s2(small_lexicon(), MelConfig{});
  CHECK(s1.serialize() == s2.serialize());
  CHECK(!s1.serialize().empty());
}
