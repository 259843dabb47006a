#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hearken/rng.hpp"
#include "hearken/tensor.hpp"

namespace hearken {

// Raised when a span cannot be turned into audio (no resolvable concept).
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate_hz = 16000;
};

struct MelConfig {
  int sample_rate = 16000;
  int n_fft = 400;
  int hop = 160;
  int n_mels = 32;
  double floor = 1e-10;
  double mel_low_hz = 60.0;
  double mel_high_hz = 4200.0;
};

struct MelSpectrogram {
  Tensor values;  // [frames x n_mels], log energies
  int frame_hop_samples = 0;
  double mel_low_hz = 0.0;
  double mel_high_hz = 0.0;
};

// HTK mel scale.
double hz_to_mel(double f_hz);
double mel_to_hz(double mel);

// Triangular filterbank over the power spectrum of a zero-padded radix-2
// FFT (fft_size = next power of two >= n_fft, Kaldi-style framing).
class MelFilterbank {
 public:
  explicit MelFilterbank(const MelConfig& cfg);

  int n_mels() const { return cfg_.n_mels; }
  int n_bins() const { return fft_size_ / 2 + 1; }
  int fft_size() const { return fft_size_; }
  double center_hz(int mel_channel) const;
  // mel channel whose center is nearest to f on the mel scale
  int channel_of_hz(double f_hz) const;
  // power spectrum bins -> per-channel energies
  std::vector<double> apply(const std::vector<double>& power_bins) const;

  const MelConfig& config() const { return cfg_; }

 private:
  MelConfig cfg_;
  int fft_size_;
  std::vector<double> center_mel_;            // n_mels + 2 edge points
  std::vector<std::vector<double>> weights_;  // [n_mels][n_bins]
  std::vector<std::pair<int, int>> support_;  // nonzero bin range per channel
};

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg);
// convenience overload matching the frontend defaults
MelSpectrogram mel_spectrogram(const Waveform& w, int n_fft, int hop, int n_mels, double floor);

// ---------------------------------------------------------------------------
// Lexicon: the synthetic sound-concept inventory. Each concept owns a unique
// surface token, a fundamental frequency snapped onto a separated mel
// channel, and a timbre seed driving its fixed harmonic series.

struct SoundConcept {
  int id = 0;
  std::vector<std::string> surface;  // one token per concept in practice
  double freq_hz = 0.0;
  std::uint64_t timbre_seed = 0;
  bool unseen = false;  // held-out concept partition
};

class Lexicon {
 public:
  void add(SoundConcept entry);
  const SoundConcept& by_id(int id) const;
  const SoundConcept* by_token(const std::string& token) const;  // null if none
  // concept ids for every token that names a concept, in token order, deduped
  std::vector<int> resolve(const std::vector<std::string>& tokens) const;

  std::size_t size() const { return concepts_.size(); }
  const std::vector<SoundConcept>& concepts() const { return concepts_; }
  std::vector<int> train_ids() const;
  std::vector<int> unseen_ids() const;

  std::string to_jsonl() const;
  static Lexicon from_jsonl(const std::string& text);
  void save(const std::string& path) const;
  static Lexicon load(const std::string& path);

 private:
  std::vector<SoundConcept> concepts_;
  std::unordered_map<std::string, int> by_token_;
};

// Frequencies are drawn log-uniformly, then snapped to mel channel centers
// with at least two channels between any two concepts, so oracle clips stay
// distinguishable by argmax channel. Throws std::invalid_argument when the
// requested count exceeds the filterbank's separation capacity.
Lexicon make_lexicon(int n_train, int n_unseen, const MelFilterbank& fb, SeededRng& rng);

// ---------------------------------------------------------------------------
// Generators (the stand-ins for text-to-audio diffusion backends)

enum class GeneratorMode { kOracle, kNoisy, kSentenceLevel };

struct GeneratorConfig {
  GeneratorMode mode = GeneratorMode::kOracle;
  double wrong_concept_prob = 0.0;  // q
  double additive_noise_std = 0.0;
  double clip_duration_s = 1.0;
  int sample_rate = 16000;
};

GeneratorMode generator_mode_from_string(const std::string& s);
std::string to_string(GeneratorMode mode);

// Fundamental plus a fixed harmonic series derived from the timbre seed,
// peak-normalized to 0.9.
Waveform synth_tone(int concept_id, const Lexicon& lexicon, double duration_s, int sample_rate);

// Oracle: the resolved concept's tone. Noisy: with probability q the tone of
// a uniformly random other concept, plus Gaussian noise, re-clipped.
// Sentence-level: the sample-wise mix of every resolved concept's tone.
Waveform mock_generate(const std::vector<std::string>& span_tokens, const Lexicon& lexicon,
                       const GeneratorConfig& cfg, SeededRng& rng);

// 16-bit PCM mono little-endian
void write_wav(const std::string& path, const Waveform& w);

}  // namespace hearken
