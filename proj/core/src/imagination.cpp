#include "hearken/imagination.hpp"

#include <stdexcept>

namespace hearken {

namespace {

EncoderStackConfig audio_stack(const AudioEncoderConfig& cfg) {
  EncoderStackConfig s;
  s.d_model = cfg.d_audio;
  s.n_heads = cfg.n_heads;
  s.n_layers = cfg.n_layers;
  s.ffn_hidden = cfg.ffn_hidden;
  return s;
}

ParamRegistry init_audio_encoder(const AudioEncoderConfig& cfg, const EncoderStackConfig& stack) {
  SeededRng rng(hash_seed(cfg.seed, 0xa0d10));
  ParamRegistry reg;
  init_linear(reg, "aenc.patch", cfg.n_mels, cfg.d_audio, rng);
  reg.add("aenc.pos", Tensor::randn({cfg.max_frames, cfg.d_audio}, rng, kInitStd));
  init_encoder_stack(reg, "aenc.enc", stack, rng);
  return reg;
}

std::uint64_t fnv1a(const void* ptr, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(ptr);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ToyAudioEncoder::ToyAudioEncoder(const AudioEncoderConfig& cfg)
    : cfg_(cfg), stack_cfg_(audio_stack(cfg)), params_(init_audio_encoder(cfg, stack_cfg_)) {}

ToyAudioEncoder::ToyAudioEncoder(const AudioEncoderConfig& cfg, ParamRegistry params)
    : cfg_(cfg), stack_cfg_(audio_stack(cfg)), params_(std::move(params)) {}

Graph::NodeId ToyAudioEncoder::encode_node(Graph& g, const LeafMap& p,
                                           const MelSpectrogram& mel) const {
  const int frames = mel.values.rows();
  if (frames < cfg_.t_audio) {
    throw std::invalid_argument("audio encoder: " + std::to_string(frames) +
                                " mel frames cannot pool into " + std::to_string(cfg_.t_audio) +
                                " audio tokens");
  }
  if (frames > cfg_.max_frames) {
    throw std::invalid_argument("audio encoder: clip of " + std::to_string(frames) +
                                " frames exceeds max_frames " + std::to_string(cfg_.max_frames));
  }
  if (mel.values.cols() != cfg_.n_mels) {
    throw std::invalid_argument("audio encoder: mel channel mismatch");
  }
  const Graph::NodeId frames_in = g.constant(mel.values);
  const Graph::NodeId embedded = linear(g, p, "aenc.patch", frames_in);
  const Graph::NodeId pos = g.slice_rows(p["aenc.pos"], 0, frames);
  const Graph::NodeId h = encoder_stack(g, p, "aenc.enc", g.add(embedded, pos), stack_cfg_);
  return g.mean_pool_rows(h, cfg_.t_audio);
}

AudioProjector::AudioProjector(const AudioProjectorConfig& cfg) : cfg_(cfg) {
  SeededRng rng(hash_seed(cfg.seed, 0x9601));
  init_linear(params_, "proj.l1", cfg.d_audio, cfg.d_audio, rng);
  init_linear(params_, "proj.l2", cfg.d_audio, cfg.d_model, rng);
}

AudioProjector::AudioProjector(const AudioProjectorConfig& cfg, ParamRegistry params)
    : cfg_(cfg), params_(std::move(params)) {}

Graph::NodeId AudioProjector::project_node(Graph& g, const LeafMap& p, Graph::NodeId pooled) const {
  return linear(g, p, "proj.l2", g.gelu(linear(g, p, "proj.l1", pooled)));
}

Tensor encode_audio(const Waveform& w, const ToyAudioEncoder& enc, const AudioProjector& proj,
                    const MelConfig& mel_cfg) {
  const MelSpectrogram mel = mel_spectrogram(w, mel_cfg);
  Graph g;
  const LeafMap ep(g, enc.params(), /*with_grads=*/false);
  const LeafMap pp(g, proj.params(), /*with_grads=*/false);
  return g.value(encode_audio_node(g, enc, ep, proj, pp, mel));
}

Graph::NodeId encode_audio_node(Graph& g, const ToyAudioEncoder& enc, const LeafMap& enc_leaves,
                                const AudioProjector& proj, const LeafMap& proj_leaves,
                                const MelSpectrogram& mel) {
  return proj.project_node(g, proj_leaves, enc.encode_node(g, enc_leaves, mel));
}

namespace {

SpanImagination imagine_span(const Span& span, const std::vector<std::string>& span_text,
                             const GeneratorFn& generate, const ScoreFn& score,
                             const RejectionConfig& rej, const ToyAudioEncoder& enc,
                             const AudioProjector& proj, const MelConfig& mel_cfg,
                             SeededRng& span_rng) {
  SpanImagination out;
  out.span = span;
  RejectionOutcome rj = sample_with_rejection(span_text, generate, score, rej, span_rng);
  out.status = rj.status;
  out.trial_scores = std::move(rj.trial_scores);
  if (rj.status == SpanAudioStatus::kAccepted) {
    out.score = rj.score;
    out.mel = mel_spectrogram(rj.clip, mel_cfg);
    out.mel_key = fnv1a(out.mel.values.data.data(), out.mel.values.data.size() * sizeof(double));
    Graph g;
    const LeafMap ep(g, enc.params(), false);
    const LeafMap pp(g, proj.params(), false);
    out.audio_tokens = g.value(encode_audio_node(g, enc, ep, proj, pp, out.mel));
    out.clip = std::move(rj.clip);
  }
  return out;
}

}  // namespace

ImaginationResult imagine(const TokenSeq& x, const std::vector<std::string>& token_text,
                          const DetectorModel& detector, const GeneratorFn& generate,
                          const ScoreFn& score, const RejectionConfig& rej,
                          const ToyAudioEncoder& enc, const AudioProjector& proj,
                          const MelConfig& mel_cfg, SeededRng& rng) {
  if (x.size() != token_text.size()) {
    throw std::invalid_argument("imagine: token ids and token text differ in length");
  }
  const std::vector<Span> spans = detector.detect(x);
  ImaginationResult result;
  result.spans.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& span = spans[i];
    std::vector<std::string> span_text(token_text.begin() + span.start,
                                       token_text.begin() + span.end + 1);
    SeededRng span_rng = rng.fork(i);
    try {
      result.spans.push_back(imagine_span(span, span_text, generate, score, rej, enc, proj,
                                          mel_cfg, span_rng));
    } catch (const GenerationError& e) {
      throw GenerationError("span #" + std::to_string(i) + " [" + std::to_string(span.start) +
                            ", " + std::to_string(span.end) + "]: " + e.what());
    } catch (const EmbeddingError& e) {
      throw GenerationError("span #" + std::to_string(i) + " [" + std::to_string(span.start) +
                            ", " + std::to_string(span.end) + "]: " + e.what());
    }
  }
  return result;
}

ImaginationResult imagine_sentence_level(const TokenSeq& x,
                                         const std::vector<std::string>& token_text,
                                         const GeneratorFn& generate, const ScoreFn& score,
                                         const RejectionConfig& rej, const ToyAudioEncoder& enc,
                                         const AudioProjector& proj, const MelConfig& mel_cfg,
                                         SeededRng& rng) {
  if (x.empty()) throw std::invalid_argument("imagine_sentence_level: empty sequence");
  if (x.size() != token_text.size()) {
    throw std::invalid_argument("imagine_sentence_level: token ids and token text differ");
  }
  const Span whole{0, static_cast<int>(x.size()) - 1};
  SeededRng span_rng = rng.fork(0);
  ImaginationResult result;
  result.spans.push_back(
      imagine_span(whole, token_text, generate, score, rej, enc, proj, mel_cfg, span_rng));
  return result;
}

}  // namespace hearken
