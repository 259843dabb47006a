#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hearken/alignment.hpp"
#include "hearken/audio.hpp"
#include "hearken/nn.hpp"
#include "hearken/spandet.hpp"

namespace hearken {

struct AudioEncoderConfig {
  int n_mels = 32;
  int d_audio = 64;
  int n_heads = 2;
  int n_layers = 1;
  int ffn_hidden = 128;
  int max_frames = 128;
  int t_audio = 8;  // pooled audio tokens per clip
  std::uint64_t seed = 0;
};

// Frame-patch transformer over mel frames: per-frame linear embedding of the
// mel bins, learned frame positions, a small encoder stack, then uniform
// temporal mean-pooling down to exactly t_audio tokens.
class ToyAudioEncoder {
 public:
  explicit ToyAudioEncoder(const AudioEncoderConfig& cfg);
  ToyAudioEncoder(const AudioEncoderConfig& cfg, ParamRegistry params);

  // [frames x n_mels] log-mel -> [t_audio x d_audio]
  Graph::NodeId encode_node(Graph& g, const LeafMap& p, const MelSpectrogram& mel) const;

  const AudioEncoderConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

 private:
  AudioEncoderConfig cfg_;
  EncoderStackConfig stack_cfg_;
  ParamRegistry params_;
};

struct AudioProjectorConfig {
  int d_audio = 64;
  int d_model = 64;
  std::uint64_t seed = 0;
};

// Two affine layers with a nonlinearity between, d_audio -> d_model.
class AudioProjector {
 public:
  explicit AudioProjector(const AudioProjectorConfig& cfg);
  AudioProjector(const AudioProjectorConfig& cfg, ParamRegistry params);

  Graph::NodeId project_node(Graph& g, const LeafMap& p, Graph::NodeId pooled) const;

  const AudioProjectorConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }

 private:
  AudioProjectorConfig cfg_;
  ParamRegistry params_;
};

// Waveform -> t_audio x d_model feature matrix (no-grad snapshot).
Tensor encode_audio(const Waveform& w, const ToyAudioEncoder& enc, const AudioProjector& proj,
                    const MelConfig& mel_cfg);
// Graph-building variant used by training; differentiable end to end.
Graph::NodeId encode_audio_node(Graph& g, const ToyAudioEncoder& enc, const LeafMap& enc_leaves,
                                const AudioProjector& proj, const LeafMap& proj_leaves,
                                const MelSpectrogram& mel);

struct SpanImagination {
  Span span;
  SpanAudioStatus status = SpanAudioStatus::kIgnored;
  std::vector<double> trial_scores;
  double score = 0.0;       // the accepted trial's score
  MelSpectrogram mel;       // cached features, accepted spans only
  std::uint64_t mel_key = 0;  // content hash, lets training share encodings
  Tensor audio_tokens;      // [t_audio x d_model], accepted spans only
  Waveform clip;            // kept for trace dumps
};

struct ImaginationResult {
  std::vector<SpanImagination> spans;

  int accepted_count() const {
    int n = 0;
    for (const auto& s : spans) n += s.status == SpanAudioStatus::kAccepted;
    return n;
  }
  bool empty() const { return spans.empty(); }
};

// Span detection -> per-span generation with rejection -> feature
// extraction. Spans the detector finds but rejection exhausts are marked
// ignored and excluded downstream. token_text must parallel x.
ImaginationResult imagine(const TokenSeq& x, const std::vector<std::string>& token_text,
                          const DetectorModel& detector, const GeneratorFn& generate,
                          const ScoreFn& score, const RejectionConfig& rej,
                          const ToyAudioEncoder& enc, const AudioProjector& proj,
                          const MelConfig& mel_cfg, SeededRng& rng);

// Sentence-level variant: the detector is bypassed and one clip is generated
// for the whole sentence, attached to a pseudo-span covering every token.
ImaginationResult imagine_sentence_level(const TokenSeq& x,
                                         const std::vector<std::string>& token_text,
                                         const GeneratorFn& generate, const ScoreFn& score,
                                         const RejectionConfig& rej, const ToyAudioEncoder& enc,
                                         const AudioProjector& proj, const MelConfig& mel_cfg,
                                         SeededRng& rng);

}  // namespace hearken
