#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "hearken/audio.hpp"

using namespace hearken;

namespace {

MelConfig default_mel() { return MelConfig{}; }

Lexicon tiny_lexicon() {
  // hand-built concepts with exact frequencies for closed-form checks
  Lexicon lex;
  lex.add({0, {"objA"}, 400.0, 7, false});
  lex.add({1, {"objB"}, 800.0, 9, false});
  lex.add({2, {"objC"}, 1600.0, 11, true});
  return lex;
}

int dominant_channel(const Waveform& w, const MelConfig& cfg) {
  const MelSpectrogram mel = mel_spectrogram(w, cfg);
  std::vector<double> profile(static_cast<std::size_t>(cfg.n_mels), 0.0);
  for (int t = 0; t < mel.values.rows(); ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) profile[static_cast<std::size_t>(m)] += std::exp(mel.values.at(t, m));
  }
  int best = 0;
  for (int m = 1; m < cfg.n_mels; ++m) {
    if (profile[static_cast<std::size_t>(m)] > profile[static_cast<std::size_t>(best)]) best = m;
  }
  return best;
}

}  // namespace

TEST_CASE("hz_to_mel closed form and monotonicity") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(hz_to_mel(-1.0), std::domain_error);
  SeededRng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double f1 = rng.uniform(0.0, 8000.0);
    const double f2 = f1 + rng.uniform(1e-6, 100.0);
    CHECK(hz_to_mel(f1) < hz_to_mel(f2));
  }
  // inverse is consistent
  for (double f : {55.0, 440.0, 1234.5, 7999.0}) {
    CHECK(mel_to_hz(hz_to_mel(f)) == doctest::Approx(f).epsilon(1e-9));
  }
}

TEST_CASE("synth_tone: length, zero crossings, peak normalization") {
  const Lexicon lex = tiny_lexicon();
  const Waveform w = synth_tone(0, lex, 0.1, 16000);
  CHECK(w.samples.size() == 1600);

  int crossings = 0;
  for (std::size_t i = 1; i < w.samples.size(); ++i) {
    if ((w.samples[i - 1] < 0.0) != (w.samples[i] < 0.0)) ++crossings;
  }
  CHECK(crossings >= 78);  // 2 * 400 Hz * 0.1 s = 80, +-2
  CHECK(crossings <= 82);

  for (int id : {0, 1, 2}) {
    const Waveform tone = synth_tone(id, lex, 0.25, 16000);
    double peak = 0.0;
    for (double v : tone.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(0.9).epsilon(1e-9));
  }

  CHECK_THROWS_AS(synth_tone(0, lex, 0.0, 16000), std::invalid_argument);
  CHECK_THROWS_AS(synth_tone(99, lex, 1.0, 16000), std::out_of_range);
}

TEST_CASE("mel_spectrogram: frame count, silence, tone localization") {
  MelConfig cfg = default_mel();

  Waveform sine;
  sine.sample_rate_hz = 16000;
  sine.samples.resize(16000);
  for (std::size_t i = 0; i < sine.samples.size(); ++i) {
    sine.samples[i] = 0.8 * std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) / 16000.0);
  }
  const MelSpectrogram mel = mel_spectrogram(sine, cfg);
  CHECK(mel.values.rows() == 1 + (16000 - 400) / 160);  // 98 frames
  CHECK(mel.values.rows() == 98);
  CHECK(mel.values.all_finite());

  const MelFilterbank fb(cfg);
  CHECK(dominant_channel(sine, cfg) == fb.channel_of_hz(440.0));

  Waveform silence;
  silence.sample_rate_hz = 16000;
  silence.samples.assign(4000, 0.0);
  const MelSpectrogram quiet = mel_spectrogram(silence, cfg);
  for (double v : quiet.values.data) CHECK(v == doctest::Approx(std::log(cfg.floor)));

  Waveform tiny;
  tiny.sample_rate_hz = 16000;
  tiny.samples.assign(100, 0.0);  // shorter than n_fft
  CHECK_THROWS_AS(mel_spectrogram(tiny, cfg), std::invalid_argument);
}

TEST_CASE("mel_spectrogram invariant to a full-period shift") {
  // 400 Hz divides 16 kHz exactly (period = 40 samples), so shifting the
  // harmonic stack by one period reproduces the same frames.
  const Lexicon lex = tiny_lexicon();
  const int period = 16000 / 400;
  Waveform longer = synth_tone(0, lex, 1.0 + 0.01, 16000);

  Waveform a, b;
  a.sample_rate_hz = b.sample_rate_hz = 16000;
  a.samples.assign(longer.samples.begin(), longer.samples.begin() + 16000);
  b.samples.assign(longer.samples.begin() + period, longer.samples.begin() + period + 16000);

  const MelSpectrogram ma = mel_spectrogram(a, default_mel());
  const MelSpectrogram mb = mel_spectrogram(b, default_mel());
  REQUIRE(ma.values.shape == mb.values.shape);
  for (std::size_t i = 0; i < ma.values.data.size(); ++i) {
    CHECK(ma.values.data[i] == doctest::Approx(mb.values.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("mock_generate oracle binds the span to its concept's channel") {
  const Lexicon lex = tiny_lexicon();
  const MelConfig cfg = default_mel();
  const MelFilterbank fb(cfg);
  GeneratorConfig gen;
  SeededRng rng(1);
  const Waveform w = mock_generate({"objA"}, lex, gen, rng);
  CHECK(dominant_channel(w, cfg) == fb.channel_of_hz(400.0));

  // q=0, no noise: bit-identical to the plain tone
  const Waveform tone = synth_tone(0, lex, gen.clip_duration_s, gen.sample_rate);
  GeneratorConfig noisy0 = gen;
  noisy0.mode = GeneratorMode::kNoisy;
  SeededRng rng2(2);
  const Waveform w2 = mock_generate({"objA"}, lex, noisy0, rng2);
  REQUIRE(w2.samples.size() == tone.samples.size());
  for (std::size_t i = 0; i < tone.samples.size(); ++i) CHECK(w2.samples[i] == tone.samples[i]);

  CHECK_THROWS_AS(mock_generate({"the", "kitchen"}, lex, gen, rng), GenerationError);
}

TEST_CASE("mock_generate q=1 rarely lands on the requested concept") {
  const Lexicon lex = tiny_lexicon();
  const MelConfig cfg = default_mel();
  const MelFilterbank fb(cfg);
  GeneratorConfig gen;
  gen.mode = GeneratorMode::kNoisy;
  gen.wrong_concept_prob = 1.0;
  gen.additive_noise_std = 0.02;
  const int target = fb.channel_of_hz(400.0);
  int matches = 0;
  for (int i = 0; i < 100; ++i) {
    SeededRng rng(5000 + i);
    if (dominant_channel(mock_generate({"objA"}, lex, gen, rng), cfg) == target) ++matches;
  }
  CHECK(matches < 5);
}

TEST_CASE("mock_generate sentence level mixes every resolved concept") {
  const Lexicon lex = tiny_lexicon();
  const MelConfig cfg = default_mel();
  const MelFilterbank fb(cfg);
  GeneratorConfig gen;
  gen.mode = GeneratorMode::kSentenceLevel;
  SeededRng rng(9);
  const Waveform w = mock_generate({"objA", "versus", "objB"}, lex, gen, rng);
  const MelSpectrogram mel = mel_spectrogram(w, cfg);
  std::vector<double> profile(static_cast<std::size_t>(cfg.n_mels), 0.0);
  for (int t = 0; t < mel.values.rows(); ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) profile[static_cast<std::size_t>(m)] += std::exp(mel.values.at(t, m));
  }
  // both fundamentals are local peaks of the averaged profile
  for (double f : {400.0, 800.0}) {
    const int ch = fb.channel_of_hz(f);
    for (int d : {-2, -1, 1, 2}) {
      const int other = ch + d;
      if (other < 0 || other >= cfg.n_mels) continue;
      CHECK(profile[static_cast<std::size_t>(ch)] > profile[static_cast<std::size_t>(other)]);
    }
  }
}

TEST_CASE("make_lexicon: separation, ranges, serialization round trip") {
  const MelFilterbank fb(default_mel());
  SeededRng rng(1234);
  const Lexicon lex = make_lexicon(10, 4, fb, rng);
  REQUIRE(lex.size() == 14);
  CHECK(lex.train_ids().size() == 10);
  CHECK(lex.unseen_ids().size() == 4);

  for (const auto& a : lex.concepts()) {
    CHECK(a.freq_hz >= 80.0);
    CHECK(a.freq_hz <= 4000.0);
    for (const auto& b : lex.concepts()) {
      if (a.id == b.id) continue;
      CHECK(std::abs(fb.channel_of_hz(a.freq_hz) - fb.channel_of_hz(b.freq_hz)) >= 2);
    }
  }

  // frequency identifiability across all concepts
  for (const auto& c : lex.concepts()) {
    const Waveform tone = synth_tone(c.id, lex, 1.0, 16000);
    CHECK(dominant_channel(tone, default_mel()) == fb.channel_of_hz(c.freq_hz));
  }

  const Lexicon copy = Lexicon::from_jsonl(lex.to_jsonl());
  REQUIRE(copy.size() == lex.size());
  for (std::size_t i = 0; i < lex.size(); ++i) {
    CHECK(copy.concepts()[i].id == lex.concepts()[i].id);
    CHECK(copy.concepts()[i].surface == lex.concepts()[i].surface);
    CHECK(copy.concepts()[i].freq_hz == lex.concepts()[i].freq_hz);
    CHECK(copy.concepts()[i].timbre_seed == lex.concepts()[i].timbre_seed);
    CHECK(copy.concepts()[i].unseen == lex.concepts()[i].unseen);
  }

  CHECK_THROWS_AS(make_lexicon(40, 4, fb, rng), std::invalid_argument);
}

TEST_CASE("wav export writes a well-formed 16-bit mono file") {
  Waveform w;
  w.sample_rate_hz = 16000;
  w.samples = {0.0, 0.5, -0.5, 1.0, -1.0};
  const std::string path = "test_tone.wav";
  write_wav(path, w);

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 44 + 10);
  CHECK(bytes.substr(0, 4) == "RIFF");
  CHECK(bytes.substr(8, 4) == "WAVE");
  CHECK(bytes.substr(36, 4) == "data");
  auto u16 = [&bytes](std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[at]) |
                                      (static_cast<unsigned char>(bytes[at + 1]) << 8));
  };
  auto u32 = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
  };
  CHECK(u16(22) == 1);       // mono
  CHECK(u32(24) == 16000);   // sample rate
  CHECK(u16(34) == 16);      // bits per sample
  CHECK(u32(40) == 10);      // data bytes
  CHECK(static_cast<std::int16_t>(u16(44)) == 0);
  CHECK(static_cast<std::int16_t>(u16(46)) == 16384);   // round(0.5 * 32767)
  CHECK(static_cast<std::int16_t>(u16(50)) == 32767);   // full scale
  std::remove(path.c_str());
}
