#include "hearken/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hearken {

MelConfig PipelineConfig::mel_config() const {
  MelConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.n_fft = n_fft;
  cfg.hop = hop;
  cfg.n_mels = n_mels;
  cfg.floor = mel_floor;
  return cfg;
}

GeneratorConfig PipelineConfig::generator_config() const {
  GeneratorConfig cfg;
  cfg.mode = generator_mode;
  cfg.wrong_concept_prob = generator_q;
  cfg.additive_noise_std = generator_noise_std;
  cfg.clip_duration_s = clip_duration_s;
  cfg.sample_rate = sample_rate;
  return cfg;
}

RejectionConfig PipelineConfig::rejection_config() const {
  return RejectionConfig{.tau = effective_tau(), .max_trials = max_trials};
}

DetectorConfig PipelineConfig::detector_config(int vocab_size) const {
  DetectorConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.d_model = det_d_model;
  cfg.n_heads = det_n_heads;
  cfg.n_layers = det_n_layers;
  cfg.ffn_hidden = det_ffn_hidden;
  cfg.max_len = max_len;
  cfg.theta = theta;
  cfg.seed = hash_seed(seed, 1);
  return cfg;
}

DetectorTrainConfig PipelineConfig::detector_train_config() const {
  DetectorTrainConfig cfg;
  cfg.epochs = det_epochs;
  cfg.batch_size = det_batch_size;
  cfg.lr = det_lr;
  cfg.word_dropout = det_word_dropout;
  cfg.seed = hash_seed(seed, 2);
  return cfg;
}

LanguageModelConfig PipelineConfig::lm_config(int vocab_size, int num_classes) const {
  LanguageModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.num_classes = num_classes;
  cfg.d_model = d_model;
  cfg.n_heads = n_heads;
  cfg.n_layers = n_layers;
  cfg.ffn_hidden = ffn_hidden;
  cfg.max_len = max_len;
  cfg.seed = hash_seed(seed, 3);
  return cfg;
}

FusionConfig PipelineConfig::fusion_config() const {
  FusionConfig cfg;
  cfg.d_model = d_model;
  cfg.n_heads = n_heads;
  cfg.ffn_hidden = ffn_hidden;
  cfg.use_gate = fusion_gate_enabled;
  cfg.seed = hash_seed(seed, 4);
  return cfg;
}

AudioEncoderConfig PipelineConfig::audio_encoder_config() const {
  AudioEncoderConfig cfg;
  cfg.n_mels = n_mels;
  cfg.d_audio = d_audio;
  cfg.n_heads = aenc_n_heads;
  cfg.n_layers = aenc_n_layers;
  cfg.ffn_hidden = aenc_ffn_hidden;
  cfg.max_frames = 128;
  cfg.t_audio = t_audio;
  cfg.seed = hash_seed(seed, 5);
  return cfg;
}

AudioProjectorConfig PipelineConfig::projector_config() const {
  AudioProjectorConfig cfg;
  cfg.d_audio = d_audio;
  cfg.d_model = d_model;
  cfg.seed = hash_seed(seed, 6);
  return cfg;
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr = lr;
  cfg.weight_decay = weight_decay;
  cfg.seed = hash_seed(seed, 7);
  return cfg;
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  PipelineConfig cfg;
  maybe(j, "d_model", cfg.d_model);
  maybe(j, "n_heads", cfg.n_heads);
  maybe(j, "n_layers", cfg.n_layers);
  maybe(j, "ffn_hidden", cfg.ffn_hidden);
  maybe(j, "max_len", cfg.max_len);
  maybe(j, "t_audio", cfg.t_audio);
  maybe(j, "d_audio", cfg.d_audio);
  maybe(j, "n_mels", cfg.n_mels);
  maybe(j, "sample_rate", cfg.sample_rate);
  maybe(j, "n_fft", cfg.n_fft);
  maybe(j, "hop", cfg.hop);
  maybe(j, "mel_floor", cfg.mel_floor);
  maybe(j, "tau", cfg.tau);
  maybe(j, "max_trials", cfg.max_trials);
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    if (g.contains("mode")) cfg.generator_mode = generator_mode_from_string(g.at("mode"));
    maybe(g, "q", cfg.generator_q);
    maybe(g, "noise_std", cfg.generator_noise_std);
    maybe(g, "clip_duration_s", cfg.clip_duration_s);
  }
  maybe(j, "lr", cfg.lr);
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "weight_decay", cfg.weight_decay);
  maybe(j, "lm_word_dropout", cfg.lm_word_dropout);
  maybe(j, "seed", cfg.seed);
  maybe(j, "det_d_model", cfg.det_d_model);
  maybe(j, "det_n_heads", cfg.det_n_heads);
  maybe(j, "det_n_layers", cfg.det_n_layers);
  maybe(j, "det_ffn_hidden", cfg.det_ffn_hidden);
  maybe(j, "theta", cfg.theta);
  maybe(j, "det_epochs", cfg.det_epochs);
  maybe(j, "det_batch_size", cfg.det_batch_size);
  maybe(j, "det_lr", cfg.det_lr);
  maybe(j, "det_word_dropout", cfg.det_word_dropout);
  maybe(j, "aenc_n_layers", cfg.aenc_n_layers);
  maybe(j, "aenc_n_heads", cfg.aenc_n_heads);
  maybe(j, "aenc_ffn_hidden", cfg.aenc_ffn_hidden);
  maybe(j, "rejection_enabled", cfg.rejection_enabled);
  maybe(j, "fusion_gate_enabled", cfg.fusion_gate_enabled);
  maybe(j, "dki_enabled", cfg.dki_enabled);
  maybe(j, "text_only", cfg.text_only);
  return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string PipelineConfig::to_json_text() const {
  nlohmann::json j;
  j["d_model"] = d_model;
  j["n_heads"] = n_heads;
  j["n_layers"] = n_layers;
  j["ffn_hidden"] = ffn_hidden;
  j["max_len"] = max_len;
  j["t_audio"] = t_audio;
  j["d_audio"] = d_audio;
  j["n_mels"] = n_mels;
  j["sample_rate"] = sample_rate;
  j["n_fft"] = n_fft;
  j["hop"] = hop;
  j["mel_floor"] = mel_floor;
  j["tau"] = tau;
  j["max_trials"] = max_trials;
  j["generator"] = {{"mode", to_string(generator_mode)},
                    {"q", generator_q},
                    {"noise_std", generator_noise_std},
                    {"clip_duration_s", clip_duration_s}};
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["weight_decay"] = weight_decay;
  j["lm_word_dropout"] = lm_word_dropout;
  j["seed"] = seed;
  j["det_d_model"] = det_d_model;
  j["det_n_heads"] = det_n_heads;
  j["det_n_layers"] = det_n_layers;
  j["det_ffn_hidden"] = det_ffn_hidden;
  j["theta"] = theta;
  j["det_epochs"] = det_epochs;
  j["det_batch_size"] = det_batch_size;
  j["det_lr"] = det_lr;
  j["det_word_dropout"] = det_word_dropout;
  j["aenc_n_layers"] = aenc_n_layers;
  j["aenc_n_heads"] = aenc_n_heads;
  j["aenc_ffn_hidden"] = aenc_ffn_hidden;
  j["rejection_enabled"] = rejection_enabled;
  j["fusion_gate_enabled"] = fusion_gate_enabled;
  j["dki_enabled"] = dki_enabled;
  j["text_only"] = text_only;
  return j.dump(2);
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json_text() << '\n';
}

}  // namespace hearken
