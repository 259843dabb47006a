#include "hearken/alignment.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace hearken {

namespace {

void l2_normalize(EmbeddingVec& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm <= 0.0) throw EmbeddingError("embedding collapsed to zero vector");
  for (double& x : v) x /= norm;
}

}  // namespace

double cosine(const EmbeddingVec& u, const EmbeddingVec& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch " + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()));
  }
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu <= 0.0 || vv <= 0.0) throw std::domain_error("cosine: zero vector operand");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

AlignmentScorer::AlignmentScorer(Lexicon lexicon, MelConfig mel_cfg)
    : lexicon_(std::move(lexicon)), mel_cfg_(mel_cfg) {
  signatures_.reserve(lexicon_.size());
  for (const auto& c : lexicon_.concepts()) {
    const Waveform tone = synth_tone(c.id, lexicon_, 1.0, mel_cfg_.sample_rate);
    signatures_.push_back(embed_audio(mel_spectrogram(tone, mel_cfg_)));
  }
}

EmbeddingVec AlignmentScorer::embed_text(const std::vector<std::string>& span_tokens) const {
  const std::vector<int> ids = lexicon_.resolve(span_tokens);
  if (ids.empty()) {
    std::string joined;
    for (const auto& t : span_tokens) joined += joined.empty() ? t : " " + t;
    throw EmbeddingError("embed_text: no concept resolves from span '" + joined + "'");
  }
  EmbeddingVec out(static_cast<std::size_t>(mel_cfg_.n_mels), 0.0);
  for (int id : ids) {
    // concept ids index the lexicon order used when signatures were built
    std::size_t idx = 0;
    for (; idx < lexicon_.size(); ++idx) {
      if (lexicon_.concepts()[idx].id == id) break;
    }
    const EmbeddingVec& sig = signatures_[idx];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sig[i];
  }
  l2_normalize(out);
  return out;
}

EmbeddingVec AlignmentScorer::embed_audio(const MelSpectrogram& mel) const {
  const int frames = mel.values.rows();
  const int bins = mel.values.cols();
  EmbeddingVec out(static_cast<std::size_t>(bins), 0.0);
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < bins; ++m) out[static_cast<std::size_t>(m)] += std::exp(mel.values.at(t, m));
  }
  for (double& v : out) v /= frames;
  l2_normalize(out);
  return out;
}

double AlignmentScorer::score(const Waveform& clip,
                              const std::vector<std::string>& span_tokens) const {
  return cosine(embed_audio(mel_spectrogram(clip, mel_cfg_)), embed_text(span_tokens));
}

std::string AlignmentScorer::serialize() const {
  std::ostringstream out;
  out << "alignment-scorer v1\n";
  out << lexicon_.to_jsonl();
  out << "mel " << mel_cfg_.sample_rate << ' ' << mel_cfg_.n_fft << ' ' << mel_cfg_.hop << ' '
      << mel_cfg_.n_mels << ' ' << mel_cfg_.floor << ' ' << mel_cfg_.mel_low_hz << ' '
      << mel_cfg_.mel_high_hz << '\n';
  out << "SIGNATURES\n";
  std::string text = out.str();
  for (const auto& sig : signatures_) {
    const std::size_t pos = text.size();
    text.resize(pos + sig.size() * sizeof(double));
    std::memcpy(text.data() + pos, sig.data(), sig.size() * sizeof(double));
  }
  return text;
}

RejectionOutcome sample_with_rejection(const std::vector<std::string>& span_tokens,
                                       const GeneratorFn& generate, const ScoreFn& score,
                                       const RejectionConfig& cfg, SeededRng& rng) {
  if (cfg.max_trials < 1) throw std::invalid_argument("rejection: max_trials must be >= 1");
  RejectionOutcome outcome;
  for (int trial = 0; trial < cfg.max_trials; ++trial) {
    Waveform clip = generate(span_tokens, rng);
    const double s = score(clip, span_tokens);
    outcome.trial_scores.push_back(s);
    if (s > cfg.tau) {  // strict: a tie rejects
      outcome.status = SpanAudioStatus::kAccepted;
      outcome.clip = std::move(clip);
      outcome.score = s;
      return outcome;
    }
  }
  outcome.status = SpanAudioStatus::kIgnored;
  return outcome;
}

}  // namespace hearken
