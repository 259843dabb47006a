#include "hearken/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace hearken {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPeakLevel = 0.9;

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// iterative radix-2 Cooley-Tukey, in place; size must be a power of two
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

}  // namespace

double hz_to_mel(double f_hz) {
  if (f_hz < 0.0) throw std::domain_error("hz_to_mel: negative frequency " + std::to_string(f_hz));
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const MelConfig& cfg) : cfg_(cfg), fft_size_(next_pow2(cfg.n_fft)) {
  if (cfg.n_mels < 4) throw std::invalid_argument("filterbank: need n_mels >= 4");
  if (cfg.mel_high_hz <= cfg.mel_low_hz) {
    throw std::invalid_argument("filterbank: mel_high_hz must exceed mel_low_hz");
  }
  const double lo = hz_to_mel(cfg.mel_low_hz);
  const double hi = hz_to_mel(cfg.mel_high_hz);
  center_mel_.resize(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    center_mel_[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (cfg.n_mels + 1);
  }
  weights_.assign(static_cast<std::size_t>(cfg.n_mels),
                  std::vector<double>(static_cast<std::size_t>(n_bins()), 0.0));
  support_.assign(static_cast<std::size_t>(cfg.n_mels), {0, 0});
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = center_mel_[static_cast<std::size_t>(m)];
    const double center = center_mel_[static_cast<std::size_t>(m) + 1];
    const double right = center_mel_[static_cast<std::size_t>(m) + 2];
    int lo = n_bins(), hi = 0;
    for (int k = 0; k < n_bins(); ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / fft_size_;
      const double mel = hz_to_mel(f);
      double w = 0.0;
      if (mel > left && mel < right) {
        w = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
        lo = std::min(lo, k);
        hi = std::max(hi, k + 1);
      }
      weights_[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w;
    }
    support_[static_cast<std::size_t>(m)] = {std::min(lo, hi), hi};
  }
}

double MelFilterbank::center_hz(int mel_channel) const {
  if (mel_channel < 0 || mel_channel >= cfg_.n_mels) {
    throw std::out_of_range("filterbank: channel " + std::to_string(mel_channel));
  }
  return mel_to_hz(center_mel_[static_cast<std::size_t>(mel_channel) + 1]);
}

int MelFilterbank::channel_of_hz(double f_hz) const {
  const double mel = hz_to_mel(f_hz);
  int best = 0;
  double best_dist = std::abs(center_mel_[1] - mel);
  for (int m = 1; m < cfg_.n_mels; ++m) {
    const double d = std::abs(center_mel_[static_cast<std::size_t>(m) + 1] - mel);
    if (d < best_dist) {
      best_dist = d;
      best = m;
    }
  }
  return best;
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& power_bins) const {
  if (static_cast<int>(power_bins.size()) != n_bins()) {
    throw std::invalid_argument("filterbank: expected " + std::to_string(n_bins()) +
                                " power bins, got " + std::to_string(power_bins.size()));
  }
  std::vector<double> out(static_cast<std::size_t>(cfg_.n_mels), 0.0);
  for (int m = 0; m < cfg_.n_mels; ++m) {
    double acc = 0.0;
    const auto& w = weights_[static_cast<std::size_t>(m)];
    const auto [lo, hi] = support_[static_cast<std::size_t>(m)];
    for (int k = lo; k < hi; ++k) {
      acc += w[static_cast<std::size_t>(k)] * power_bins[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

namespace {

// filterbank/window construction is pure in the config; memoize it so the
// per-clip cost is just framing, FFT and the filter dot products
struct MelScratch {
  MelFilterbank fb;
  std::vector<double> window;
};

const MelScratch& mel_scratch(const MelConfig& cfg) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int, int, double, double, double>,
                  std::unique_ptr<MelScratch>>
      cache;
  const auto key = std::make_tuple(cfg.sample_rate, cfg.n_fft, cfg.hop, cfg.n_mels, cfg.floor,
                                   cfg.mel_low_hz, cfg.mel_high_hz);
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto scratch = std::make_unique<MelScratch>(MelScratch{MelFilterbank(cfg), {}});
    scratch->window.resize(static_cast<std::size_t>(cfg.n_fft));
    for (int i = 0; i < cfg.n_fft; ++i) {
      scratch->window[static_cast<std::size_t>(i)] =
          0.5 * (1.0 - std::cos(kTwoPi * i / (cfg.n_fft - 1)));
    }
    it = cache.emplace(key, std::move(scratch)).first;
  }
  return *it->second;
}

}  // namespace

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  const int len = static_cast<int>(w.samples.size());
  if (len < cfg.n_fft) {
    throw std::invalid_argument("mel_spectrogram: waveform of " + std::to_string(len) +
                                " samples is shorter than n_fft " + std::to_string(cfg.n_fft));
  }
  if (cfg.hop < 1) throw std::invalid_argument("mel_spectrogram: hop must be >= 1");
  const MelScratch& scratch = mel_scratch(cfg);
  const MelFilterbank& fb = scratch.fb;
  const std::vector<double>& window = scratch.window;
  const int fft_size = fb.fft_size();
  const int frames = 1 + (len - cfg.n_fft) / cfg.hop;

  MelSpectrogram mel;
  mel.values = Tensor::zeros({frames, cfg.n_mels});
  mel.frame_hop_samples = cfg.hop;
  mel.mel_low_hz = cfg.mel_low_hz;
  mel.mel_high_hz = cfg.mel_high_hz;

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size));
  std::vector<double> power(static_cast<std::size_t>(fb.n_bins()));
  for (int t = 0; t < frames; ++t) {
    const int start = t * cfg.hop;
    for (int i = 0; i < cfg.n_fft; ++i) {
      buf[static_cast<std::size_t>(i)] = {w.samples[static_cast<std::size_t>(start + i)] *
                                              window[static_cast<std::size_t>(i)],
                                          0.0};
    }
    std::fill(buf.begin() + cfg.n_fft, buf.end(), std::complex<double>(0.0, 0.0));
    fft_radix2(buf);
    for (int k = 0; k < fb.n_bins(); ++k) {
      power[static_cast<std::size_t>(k)] = std::norm(buf[static_cast<std::size_t>(k)]);
    }
    const std::vector<double> energies = fb.apply(power);
    for (int m = 0; m < cfg.n_mels; ++m) {
      mel.values.at(t, m) = std::log(std::max(energies[static_cast<std::size_t>(m)], cfg.floor));
    }
  }
  return mel;
}

MelSpectrogram mel_spectrogram(const Waveform& w, int n_fft, int hop, int n_mels, double floor) {
  MelConfig cfg;
  cfg.sample_rate = w.sample_rate_hz;
  cfg.n_fft = n_fft;
  cfg.hop = hop;
  cfg.n_mels = n_mels;
  cfg.floor = floor;
  return mel_spectrogram(w, cfg);
}

// ---------------------------------------------------------------------------

void Lexicon::add(SoundConcept entry) {
  for (const auto& tok : entry.surface) {
    if (by_token_.count(tok)) {
      throw std::invalid_argument("lexicon: surface token '" + tok + "' already taken");
    }
  }
  for (const auto& tok : entry.surface) by_token_[tok] = static_cast<int>(concepts_.size());
  concepts_.push_back(std::move(entry));
}

const SoundConcept& Lexicon::by_id(int id) const {
  for (const auto& c : concepts_) {
    if (c.id == id) return c;
  }
  throw std::out_of_range("lexicon: unknown concept id " + std::to_string(id));
}

const SoundConcept* Lexicon::by_token(const std::string& token) const {
  auto it = by_token_.find(token);
  if (it == by_token_.end()) return nullptr;
  return &concepts_[static_cast<std::size_t>(it->second)];
}

std::vector<int> Lexicon::resolve(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  for (const auto& tok : tokens) {
    const SoundConcept* c = by_token(tok);
    if (c && std::find(ids.begin(), ids.end(), c->id) == ids.end()) ids.push_back(c->id);
  }
  return ids;
}

std::vector<int> Lexicon::train_ids() const {
  std::vector<int> ids;
  for (const auto& c : concepts_) {
    if (!c.unseen) ids.push_back(c.id);
  }
  return ids;
}

std::vector<int> Lexicon::unseen_ids() const {
  std::vector<int> ids;
  for (const auto& c : concepts_) {
    if (c.unseen) ids.push_back(c.id);
  }
  return ids;
}

std::string Lexicon::to_jsonl() const {
  std::ostringstream out;
  for (const auto& c : concepts_) {
    nlohmann::json j;
    j["id"] = c.id;
    j["tokens"] = c.surface;
    j["freq_hz"] = c.freq_hz;
    j["timbre_seed"] = c.timbre_seed;
    j["partition"] = c.unseen ? "unseen" : "train";
    out << j.dump() << '\n';
  }
  return out.str();
}

Lexicon Lexicon::from_jsonl(const std::string& text) {
  Lexicon lex;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    SoundConcept c;
    c.id = j.at("id").get<int>();
    c.surface = j.at("tokens").get<std::vector<std::string>>();
    c.freq_hz = j.at("freq_hz").get<double>();
    c.timbre_seed = j.at("timbre_seed").get<std::uint64_t>();
    c.unseen = j.at("partition").get<std::string>() == "unseen";
    lex.add(std::move(c));
  }
  return lex;
}

void Lexicon::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("lexicon: cannot write " + path);
  out << to_jsonl();
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("lexicon: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

namespace {

std::string make_pseudoword(SeededRng& rng) {
  static const char* kConsonants = "bdfgklmnprstvz";
  static const char* kVowels = "aeiou";
  std::string word;
  const int syllables = 2 + static_cast<int>(rng.uniform_index(2));
  for (int s = 0; s < syllables; ++s) {
    word += kConsonants[rng.uniform_index(14)];
    word += kVowels[rng.uniform_index(5)];
  }
  return word;
}

}  // namespace

Lexicon make_lexicon(int n_train, int n_unseen, const MelFilterbank& fb, SeededRng& rng) {
  const int total = n_train + n_unseen;
  if (n_train < 1 || n_unseen < 0) throw std::invalid_argument("lexicon: bad concept counts");
  // channels 0, 2, 4, ... keep two-channel separation between any two concepts
  const int capacity = (fb.n_mels() + 1) / 2;
  if (total > capacity) {
    throw std::invalid_argument("lexicon: " + std::to_string(total) +
                                " concepts exceed separation capacity " +
                                std::to_string(capacity) + " of the filterbank");
  }

  const double f_lo = fb.center_hz(0);
  const double f_hi = fb.center_hz(fb.n_mels() - 2);
  std::vector<bool> taken(static_cast<std::size_t>(capacity), false);
  std::vector<int> slots;
  for (int i = 0; i < total; ++i) {
    // log-uniform draw snapped to the nearest free even channel
    const double f = std::exp(rng.uniform(std::log(f_lo), std::log(f_hi)));
    const int want = fb.channel_of_hz(f) / 2;
    int best = -1;
    for (int delta = 0; delta < capacity; ++delta) {
      for (int sign : {1, -1}) {
        const int cand = want + sign * delta;
        if (cand >= 0 && cand < capacity && !taken[static_cast<std::size_t>(cand)]) {
          best = cand;
          break;
        }
      }
      if (best >= 0) break;
    }
    taken[static_cast<std::size_t>(best)] = true;
    slots.push_back(best);
  }

  Lexicon lex;
  std::vector<std::string> used_words;
  for (int i = 0; i < total; ++i) {
    SoundConcept c;
    c.id = i;
    c.freq_hz = fb.center_hz(slots[static_cast<std::size_t>(i)] * 2);
    c.timbre_seed = rng.next_u64();
    c.unseen = i >= n_train;
    std::string word = make_pseudoword(rng);
    while (std::find(used_words.begin(), used_words.end(), word) != used_words.end()) {
      word = make_pseudoword(rng);
    }
    used_words.push_back(word);
    c.surface = {word};
    lex.add(std::move(c));
  }
  return lex;
}

// ---------------------------------------------------------------------------

GeneratorMode generator_mode_from_string(const std::string& s) {
  if (s == "oracle") return GeneratorMode::kOracle;
  if (s == "noisy") return GeneratorMode::kNoisy;
  if (s == "sentence_level") return GeneratorMode::kSentenceLevel;
  throw std::invalid_argument("unknown generator mode: " + s);
}

std::string to_string(GeneratorMode mode) {
  switch (mode) {
    case GeneratorMode::kOracle: return "oracle";
    case GeneratorMode::kNoisy: return "noisy";
    case GeneratorMode::kSentenceLevel: return "sentence_level";
  }
  return "?";
}

namespace {

void render_tone(const SoundConcept& c, int sample_rate, std::vector<double>& out) {
  // fixed harmonic recipe per concept: up to three overtones below Nyquist,
  // amplitudes decaying with harmonic number
  SeededRng timbre(c.timbre_seed);
  std::vector<std::pair<double, double>> partials{{c.freq_hz, 1.0}};
  for (int h = 2; h <= 4; ++h) {
    const double f = c.freq_hz * h;
    if (f >= sample_rate / 2.0) break;
    partials.emplace_back(f, timbre.uniform(0.05, 0.3) / h);
  }
  const double dt = 1.0 / sample_rate;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = 0.0;
    for (const auto& [f, a] : partials) v += a * std::sin(kTwoPi * f * static_cast<double>(i) * dt);
    out[i] += v;
  }
}

void peak_normalize(std::vector<double>& samples, double peak) {
  double mx = 0.0;
  for (double v : samples) mx = std::max(mx, std::abs(v));
  if (mx <= 0.0) return;
  const double s = peak / mx;
  for (double& v : samples) v *= s;
}

}  // namespace

Waveform synth_tone(int concept_id, const Lexicon& lexicon, double duration_s, int sample_rate) {
  if (duration_s <= 0.0) throw std::invalid_argument("synth_tone: duration must be positive");
  const SoundConcept& c = lexicon.by_id(concept_id);
  Waveform w;
  w.sample_rate_hz = sample_rate;
  w.samples.assign(static_cast<std::size_t>(duration_s * sample_rate), 0.0);
  if (w.samples.empty()) throw std::invalid_argument("synth_tone: duration too short");
  render_tone(c, sample_rate, w.samples);
  peak_normalize(w.samples, kPeakLevel);
  return w;
}

Waveform mock_generate(const std::vector<std::string>& span_tokens, const Lexicon& lexicon,
                       const GeneratorConfig& cfg, SeededRng& rng) {
  const std::vector<int> resolved = lexicon.resolve(span_tokens);
  if (resolved.empty()) {
    throw GenerationError("mock_generate: no concept resolves from span '" +
                          join_tokens(span_tokens) + "'");
  }

  if (cfg.mode == GeneratorMode::kSentenceLevel) {
    Waveform w;
    w.sample_rate_hz = cfg.sample_rate;
    w.samples.assign(static_cast<std::size_t>(cfg.clip_duration_s * cfg.sample_rate), 0.0);
    for (int id : resolved) render_tone(lexicon.by_id(id), cfg.sample_rate, w.samples);
    peak_normalize(w.samples, kPeakLevel);
    return w;
  }

  int concept_id = resolved.front();
  if (cfg.mode == GeneratorMode::kNoisy) {
    if (lexicon.size() > 1 && rng.bernoulli(cfg.wrong_concept_prob)) {
      // substitute a uniformly random *other* concept
      const auto& all = lexicon.concepts();
      int pick;
      do {
        pick = all[rng.uniform_index(all.size())].id;
      } while (pick == concept_id);
      concept_id = pick;
    }
    Waveform w = synth_tone(concept_id, lexicon, cfg.clip_duration_s, cfg.sample_rate);
    if (cfg.additive_noise_std > 0.0) {
      for (double& v : w.samples) {
        v = std::clamp(v + rng.normal(0.0, cfg.additive_noise_std), -1.0, 1.0);
      }
    }
    return w;
  }

  return synth_tone(concept_id, lexicon, cfg.clip_duration_s, cfg.sample_rate);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t sr = static_cast<std::uint32_t>(w.sample_rate_hz);
  auto put16 = [&out](std::uint16_t v) { out.put(static_cast<char>(v & 0xff)).put(static_cast<char>(v >> 8)); };
  auto put32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(16);
  put16(1);  // PCM
  put16(1);  // mono
  put32(sr);
  put32(sr * 2);  // byte rate
  put16(2);       // block align
  put16(16);      // bits per sample
  out.write("data", 4);
  put32(data_bytes);
  for (double v : w.samples) {
    const double clamped = std::clamp(v, -1.0, 1.0);
    const auto s = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put16(static_cast<std::uint16_t>(s));
  }
  if (!out) throw std::runtime_error("write_wav: write failed: " + path);
}

}  // namespace hearken
