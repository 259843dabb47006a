#pragma once

#include <cstdint>
#include <string>

#include "hearken/alignment.hpp"
#include "hearken/audio.hpp"
#include "hearken/dataset.hpp"
#include "hearken/encoder.hpp"
#include "hearken/imagination.hpp"
#include "hearken/spandet.hpp"

namespace hearken {

// One flat configuration for the whole pipeline. JSON keys mirror the field
// paths (generator options nest under "generator").
struct PipelineConfig {
  // model dimensions
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int ffn_hidden = 256;
  int max_len = 32;
  int t_audio = 8;
  int d_audio = 64;

  // audio front end
  int n_mels = 32;
  int sample_rate = 16000;
  int n_fft = 400;
  int hop = 160;
  double mel_floor = 1e-10;

  // rejection sampling
  double tau = 0.6;
  int max_trials = 2;

  // generator
  GeneratorMode generator_mode = GeneratorMode::kOracle;
  double generator_q = 0.0;
  double generator_noise_std = 0.0;
  double clip_duration_s = 1.0;

  // end-to-end training
  double lr = 1e-3;
  int epochs = 12;
  int batch_size = 32;
  double weight_decay = 0.01;
  // chance of swapping a gold concept token for a random vocabulary id in
  // the encoder's training input (audio and spans are untouched); keeps the
  // model from leaning on concept word identity alone
  double lm_word_dropout = 0.5;
  std::uint64_t seed = 0;

  // detector
  int det_d_model = 32;
  int det_n_heads = 2;
  int det_n_layers = 2;
  int det_ffn_hidden = 128;
  double theta = 0.5;
  int det_epochs = 6;
  int det_batch_size = 16;
  double det_lr = 1e-3;
  double det_word_dropout = 0.3;

  // audio encoder
  int aenc_n_layers = 1;
  int aenc_n_heads = 2;
  int aenc_ffn_hidden = 128;

  // ablation switches
  bool rejection_enabled = true;   // off: tau forced to -1
  bool fusion_gate_enabled = true; // off: z_fused = z_ffn on touched rows
  bool dki_enabled = true;         // off: one sentence-level clip
  bool text_only = false;          // off-switch for the whole imagination path

  double effective_tau() const { return rejection_enabled ? tau : -1.0; }

  MelConfig mel_config() const;
  GeneratorConfig generator_config() const;
  RejectionConfig rejection_config() const;
  DetectorConfig detector_config(int vocab_size) const;
  DetectorTrainConfig detector_train_config() const;
  LanguageModelConfig lm_config(int vocab_size, int num_classes) const;
  FusionConfig fusion_config() const;
  AudioEncoderConfig audio_encoder_config() const;
  AudioProjectorConfig projector_config() const;
  TrainConfig train_config() const;

  static PipelineConfig from_json_file(const std::string& path);
  static PipelineConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  void save(const std::string& path) const;
};

}  // namespace hearken
