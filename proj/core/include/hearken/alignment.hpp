#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hearken/audio.hpp"
#include "hearken/rng.hpp"

namespace hearken {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EmbeddingVec = std::vector<double>;

// u.v / (|u||v|); throws std::domain_error on a zero operand.
double cosine(const EmbeddingVec& u, const EmbeddingVec& v);

struct RejectionConfig {
  double tau = 0.0;   // acceptance needs score strictly greater than tau
  int max_trials = 2;
};

// Paired text/audio embedder. Both sides live in mel-profile space: a text
// span embeds as the L2-normalized sum of its resolved concepts' canonical
// spectral signatures (time-averaged mel energy of the concept's clean
// tone); audio embeds as its own time-averaged mel energy profile. Cosine
// between the two is the relevance score that gates rejection sampling.
class AlignmentScorer {
 public:
  AlignmentScorer(Lexicon lexicon, MelConfig mel_cfg);

  int dim() const { return mel_cfg_.n_mels; }
  EmbeddingVec embed_text(const std::vector<std::string>& span_tokens) const;
  EmbeddingVec embed_audio(const MelSpectrogram& mel) const;
  double score(const Waveform& clip, const std::vector<std::string>& span_tokens) const;

  const Lexicon& lexicon() const { return lexicon_; }
  const MelConfig& mel_config() const { return mel_cfg_; }

  // full deterministic state (config + signature table); the frozen-component
  // checks compare these bytes before/after training
  std::string serialize() const;

 private:
  Lexicon lexicon_;
  MelConfig mel_cfg_;
  std::vector<EmbeddingVec> signatures_;  // parallel to lexicon_.concepts()
};

using GeneratorFn = std::function<Waveform(const std::vector<std::string>&, SeededRng&)>;
using ScoreFn = std::function<double(const Waveform&, const std::vector<std::string>&)>;

enum class SpanAudioStatus { kAccepted, kIgnored };

struct RejectionOutcome {
  SpanAudioStatus status = SpanAudioStatus::kIgnored;
  Waveform clip;                     // meaningful only when accepted
  double score = 0.0;                // the accepted trial's score
  std::vector<double> trial_scores;  // every trial, in order
};

// Generates up to cfg.max_trials clips, accepting the first whose score
// strictly exceeds tau; returns Ignored with the recorded trial scores when
// every trial fails. Generator errors propagate.
RejectionOutcome sample_with_rejection(const std::vector<std::string>& span_tokens,
                                       const GeneratorFn& generate, const ScoreFn& score,
                                       const RejectionConfig& cfg, SeededRng& rng);

}  // namespace hearken
