#include "hearken/bench.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "hearken/pool.hpp"

namespace hearken {

GeneratorFn Pipeline::generator() const {
  const GeneratorConfig gen = cfg.generator_config();
  const Lexicon& lex = bench->lexicon;
  return [gen, &lex](const std::vector<std::string>& span, SeededRng& rng) {
    return mock_generate(span, lex, gen, rng);
  };
}

GeneratorFn Pipeline::sentence_generator() const {
  GeneratorConfig gen = cfg.generator_config();
  gen.mode = GeneratorMode::kSentenceLevel;
  const Lexicon& lex = bench->lexicon;
  return [gen, &lex](const std::vector<std::string>& span, SeededRng& rng) {
    return mock_generate(span, lex, gen, rng);
  };
}

ScoreFn Pipeline::score_fn() const {
  const AlignmentScorer& s = scorer;
  return [&s](const Waveform& clip, const std::vector<std::string>& span) {
    return s.score(clip, span);
  };
}

Pipeline make_pipeline(const Benchmark& bench, const PipelineConfig& cfg) {
  const int vocab_size = bench.vocab.size();
  const int num_classes = static_cast<int>(bench.splits.class_names.size());
  return Pipeline{cfg,
                  &bench,
                  DetectorModel(cfg.detector_config(vocab_size)),
                  AlignmentScorer(bench.lexicon, cfg.mel_config()),
                  ModelBundle{LanguageModel(cfg.lm_config(vocab_size, num_classes)),
                              FusionModule(cfg.fusion_config()),
                              ToyAudioEncoder(cfg.audio_encoder_config()),
                              AudioProjector(cfg.projector_config())}};
}

void train_pipeline_detector(Pipeline& pipeline, std::vector<double>* loss_curve) {
  const std::vector<LabeledTokenSeq> data =
      detector_data(pipeline.bench->splits.train, pipeline.bench->vocab);
  pipeline.detector = train_detector(data, pipeline.cfg.detector_config(pipeline.bench->vocab.size()),
                                     pipeline.cfg.detector_train_config(), loss_curve);
  pipeline.detector.params().set_all_trainable(false);  // frozen from here on
}

std::optional<ImaginationResult> imagine_example(const Pipeline& pipeline,
                                                 const EncodedExample& ex, std::uint64_t stream) {
  if (pipeline.cfg.text_only) return ImaginationResult{};
  SeededRng rng(hash_seed(pipeline.cfg.seed, stream));
  try {
    if (pipeline.cfg.dki_enabled) {
      return imagine(ex.tokens, ex.text, pipeline.detector, pipeline.generator(),
                     pipeline.score_fn(), pipeline.cfg.rejection_config(),
                     pipeline.bundle.audio_encoder, pipeline.bundle.projector,
                     pipeline.cfg.mel_config(), rng);
    }
    return imagine_sentence_level(ex.tokens, ex.text, pipeline.sentence_generator(),
                                  pipeline.score_fn(), pipeline.cfg.rejection_config(),
                                  pipeline.bundle.audio_encoder, pipeline.bundle.projector,
                                  pipeline.cfg.mel_config(), rng);
  } catch (const GenerationError&) {
    // a detector false positive can name no concept; the span set degrades to
    // text-only for this example and the caller records the failure
    return std::nullopt;
  }
}

std::vector<TrainExample> prepare_train_set(const Pipeline& pipeline,
                                            const std::vector<Example>& split) {
  SeededRng dropout_rng(hash_seed(pipeline.cfg.seed, 0x1dd));
  const int vocab_size = pipeline.bench->vocab.size();
  std::vector<TrainExample> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    const EncodedExample enc = encode_example(split[i], pipeline.bench->vocab);
    TrainExample ex;
    ex.tokens = enc.tokens;
    ex.label = enc.label_id;
    auto imagination = imagine_example(pipeline, enc, hash_seed(1, i));
    if (imagination) ex.imagination = std::move(*imagination);
    // concept-word dropout in the encoder input; imagination already ran on
    // the real tokens, so the audio features stay intact
    if (pipeline.cfg.lm_word_dropout > 0.0) {
      for (const Span& s : enc.gold_spans) {
        for (int t = s.start; t <= s.end; ++t) {
          if (dropout_rng.bernoulli(pipeline.cfg.lm_word_dropout)) {
            ex.tokens[static_cast<std::size_t>(t)] =
                static_cast<int>(dropout_rng.uniform_index(static_cast<std::uint64_t>(vocab_size)));
          }
        }
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<EpochStats> train_pipeline(Pipeline& pipeline) {
  const std::vector<TrainExample> train_set =
      prepare_train_set(pipeline, pipeline.bench->splits.train);
  return train_end_to_end(pipeline.bundle, train_set, pipeline.cfg.train_config());
}

long EvalReport::spans_total() const {
  long n = 0;
  for (const auto& r : records) n += static_cast<long>(r.span_statuses.size());
  return n;
}

long EvalReport::spans_accepted() const {
  long n = 0;
  for (const auto& r : records) {
    for (const auto s : r.span_statuses) n += s == SpanAudioStatus::kAccepted;
  }
  return n;
}

double EvalReport::retention() const {
  const long total = spans_total();
  return total == 0 ? 1.0 : static_cast<double>(spans_accepted()) / static_cast<double>(total);
}

double EvalReport::rejected_after_n() const { return 1.0 - retention(); }

EvalReport evaluate(const Pipeline& pipeline, const std::vector<Example>& split,
                    std::uint64_t stream_salt) {
  EvalReport report;
  long correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const EncodedExample enc = encode_example(split[i], pipeline.bench->vocab);
    EvalRecord rec;
    rec.index = static_cast<int>(i);
    rec.label = enc.label_id;

    ImaginationResult imagination;
    auto maybe = imagine_example(pipeline, enc, hash_seed(2 + stream_salt, i));
    if (maybe) {
      imagination = std::move(*maybe);
    } else {
      rec.imagination_failed = true;
    }
    for (const auto& s : imagination.spans) {
      rec.span_statuses.push_back(s.status);
      rec.trial_scores.push_back(s.trial_scores);
    }

    const ForwardResult fwd = forward(pipeline.bundle, enc.tokens, imagination);
    int argmax = 0;
    for (std::size_t c = 1; c < fwd.logits.size(); ++c) {
      if (fwd.logits[c] > fwd.logits[static_cast<std::size_t>(argmax)]) {
        argmax = static_cast<int>(c);
      }
    }
    rec.prediction = argmax;
    rec.correct = rec.prediction == rec.label;
    correct += rec.correct;
    report.records.push_back(std::move(rec));
  }
  report.accuracy =
      split.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(split.size());
  return report;
}

RunResult run_pipeline(const Benchmark& bench, PipelineConfig cfg,
                       const DetectorModel* shared_detector) {
  Pipeline pipeline = make_pipeline(bench, cfg);
  RunResult result;
  if (shared_detector) {
    pipeline.detector = *shared_detector;
    pipeline.detector.params().set_all_trainable(false);
  } else if (!cfg.text_only) {  // the detector never runs in a text-only pipeline
    train_pipeline_detector(pipeline);
  }

  if (!cfg.text_only) {
    result.detector_dev_f1 =
        token_f1(pipeline.detector, detector_data(bench.splits.dev, bench.vocab));
  }
  result.curve = train_pipeline(pipeline);

  result.dev_acc = evaluate(pipeline, bench.splits.dev, 10).accuracy;
  result.test_acc = evaluate(pipeline, bench.splits.test, 20).accuracy;
  if (!bench.splits.unseen.empty()) {
    const EvalReport unseen = evaluate(pipeline, bench.splits.unseen, 30);
    result.unseen_acc = unseen.accuracy;
    result.unseen_retention = unseen.retention();
    result.unseen_rejected_after_n = unseen.rejected_after_n();
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull: return "full";
    case AblationVariant::kNoRejection: return "no_rejection";
    case AblationVariant::kNoFusionGate: return "no_fg";
    case AblationVariant::kNoDki: return "no_dki";
    case AblationVariant::kNoDkiNoFusionGate: return "no_dki_no_fg";
  }
  return "?";
}

PipelineConfig apply_variant(PipelineConfig cfg, AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull: break;
    case AblationVariant::kNoRejection: cfg.rejection_enabled = false; break;
    case AblationVariant::kNoFusionGate: cfg.fusion_gate_enabled = false; break;
    case AblationVariant::kNoDki: cfg.dki_enabled = false; break;
    case AblationVariant::kNoDkiNoFusionGate:
      cfg.dki_enabled = false;
      cfg.fusion_gate_enabled = false;
      break;
  }
  return cfg;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

}  // namespace

AblationReport run_ablation(const Benchmark& bench, const PipelineConfig& base,
                            const AblationConfig& ab, std::ostream* log) {
  if (ab.seeds.size() < 3) throw std::invalid_argument("run_ablation: need >= 3 seeds");

  // one detector per seed, shared across every cell with that seed
  std::vector<DetectorModel> detectors;
  detectors.reserve(ab.seeds.size());
  for (std::uint64_t seed : ab.seeds) {
    PipelineConfig cfg = base;
    cfg.seed = seed;
    Pipeline p = make_pipeline(bench, cfg);
    train_pipeline_detector(p);
    detectors.push_back(std::move(p.detector));
  }
  auto detector_for = [&](std::uint64_t seed) -> const DetectorModel* {
    for (std::size_t i = 0; i < ab.seeds.size(); ++i) {
      if (ab.seeds[i] == seed) return &detectors[i];
    }
    return nullptr;
  };

  struct Job {
    PipelineConfig cfg;
    std::uint64_t seed;
    // cell routing
    int variant = -1;   // index into variants
    int tau_at = -1;    // index into tau_sweep
    int trial_at = -1;  // index into trial_sweep
  };
  struct JobResult {
    bool ok = false;
    std::string error;
    double test_acc = 0.0;
    double unseen_acc = 0.0;
    double retention = 1.0;
    double rejected_after_n = 0.0;
  };

  const std::vector<AblationVariant> variants = {
      AblationVariant::kFull, AblationVariant::kNoRejection, AblationVariant::kNoFusionGate,
      AblationVariant::kNoDki, AblationVariant::kNoDkiNoFusionGate};

  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::uint64_t seed : ab.seeds) {
      PipelineConfig cfg = apply_variant(base, variants[v]);
      cfg.seed = seed;
      Job job{cfg, seed};
      job.variant = static_cast<int>(v);
      jobs.push_back(std::move(job));
    }
  }
  const int sweep_seed_count =
      std::min<int>(ab.sweep_seeds, static_cast<int>(ab.seeds.size()));
  for (std::size_t t = 0; t < ab.tau_grid.size(); ++t) {
    for (int s = 0; s < sweep_seed_count; ++s) {
      PipelineConfig cfg = base;
      cfg.rejection_enabled = true;
      cfg.tau = ab.tau_grid[t];
      if (cfg.tau <= -1.0) cfg.rejection_enabled = false;
      cfg.seed = ab.seeds[static_cast<std::size_t>(s)];
      Job job{cfg, cfg.seed};
      job.tau_at = static_cast<int>(t);
      jobs.push_back(std::move(job));
    }
  }
  for (std::size_t t = 0; t < ab.trial_grid.size(); ++t) {
    for (int s = 0; s < sweep_seed_count; ++s) {
      PipelineConfig cfg = base;
      cfg.max_trials = ab.trial_grid[t];
      cfg.seed = ab.seeds[static_cast<std::size_t>(s)];
      Job job{cfg, cfg.seed};
      job.trial_at = static_cast<int>(t);
      jobs.push_back(std::move(job));
    }
  }

  std::vector<JobResult> results(jobs.size());
  std::mutex log_mutex;
  parallel_jobs(static_cast<int>(jobs.size()), [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    JobResult& out = results[static_cast<std::size_t>(i)];
    try {
      const RunResult run = run_pipeline(bench, job.cfg, detector_for(job.seed));
      out.ok = true;
      out.test_acc = run.test_acc;
      out.unseen_acc = run.unseen_acc;
      out.retention = run.unseen_retention;
      out.rejected_after_n = run.unseen_rejected_after_n;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();  // recorded, not fatal to the grid
    }
    if (log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *log << "[ablate] job " << (i + 1) << "/" << jobs.size();
      if (out.ok) {
        *log << " test=" << out.test_acc << " unseen=" << out.unseen_acc;
      } else {
        *log << " FAILED: " << out.error;
      }
      *log << std::endl;
    }
  });

  AblationReport report;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<double> test_accs, unseen_accs;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].variant != static_cast<int>(v) || !results[i].ok) continue;
      test_accs.push_back(results[i].test_acc);
      unseen_accs.push_back(results[i].unseen_acc);
    }
    for (const auto& [split, accs] :
         {std::pair{std::string("test"), test_accs}, {std::string("unseen"), unseen_accs}}) {
      const MeanStd ms = mean_std(accs);
      report.cells.push_back({to_string(variants[v]), split, ms.mean, ms.stddev,
                              static_cast<int>(accs.size()), accs});
    }
  }
  for (std::size_t t = 0; t < ab.tau_grid.size(); ++t) {
    std::vector<double> accs, retentions, rejected;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].tau_at != static_cast<int>(t) || !results[i].ok) continue;
      accs.push_back(results[i].unseen_acc);
      retentions.push_back(results[i].retention);
      rejected.push_back(results[i].rejected_after_n);
    }
    SweepPoint pt;
    pt.tau = ab.tau_grid[t];
    pt.max_trials = base.max_trials;
    pt.accuracy_mean = mean_std(accs).mean;
    pt.accuracy_std = mean_std(accs).stddev;
    pt.retention_mean = mean_std(retentions).mean;
    pt.rejected_after_n_mean = mean_std(rejected).mean;
    pt.n_seeds = static_cast<int>(accs.size());
    report.tau_sweep.push_back(pt);
  }
  for (std::size_t t = 0; t < ab.trial_grid.size(); ++t) {
    std::vector<double> accs, retentions, rejected;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].trial_at != static_cast<int>(t) || !results[i].ok) continue;
      accs.push_back(results[i].unseen_acc);
      retentions.push_back(results[i].retention);
      rejected.push_back(results[i].rejected_after_n);
    }
    SweepPoint pt;
    pt.tau = base.tau;
    pt.max_trials = ab.trial_grid[t];
    pt.accuracy_mean = mean_std(accs).mean;
    pt.accuracy_std = mean_std(accs).stddev;
    pt.retention_mean = mean_std(retentions).mean;
    pt.rejected_after_n_mean = mean_std(rejected).mean;
    pt.n_seeds = static_cast<int>(accs.size());
    report.trial_sweep.push_back(pt);
  }
  return report;
}

void write_ablation_csv(const std::string& dir, const AblationReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/ablation_variants.csv");
    if (!out) throw std::runtime_error("ablation: cannot write variants csv");
    out << "variant,split,mean_accuracy,std_accuracy,n_seeds\n";
    for (const auto& c : report.cells) {
      out << c.variant << ',' << c.split << ',' << c.mean_accuracy << ',' << c.std_accuracy << ','
          << c.n_seeds << '\n';
    }
  }
  {
    std::ofstream out(dir + "/ablation_tau_sweep.csv");
    if (!out) throw std::runtime_error("ablation: cannot write tau sweep csv");
    out << "tau,max_trials,accuracy_mean,accuracy_std,retention_mean,rejected_after_n_mean,n_seeds\n";
    for (const auto& p : report.tau_sweep) {
      out << p.tau << ',' << p.max_trials << ',' << p.accuracy_mean << ',' << p.accuracy_std << ','
          << p.retention_mean << ',' << p.rejected_after_n_mean << ',' << p.n_seeds << '\n';
    }
  }
  {
    std::ofstream out(dir + "/ablation_trial_sweep.csv");
    if (!out) throw std::runtime_error("ablation: cannot write trial sweep csv");
    out << "tau,max_trials,accuracy_mean,accuracy_std,retention_mean,rejected_after_n_mean,n_seeds\n";
    for (const auto& p : report.trial_sweep) {
      out << p.tau << ',' << p.max_trials << ',' << p.accuracy_mean << ',' << p.accuracy_std << ','
          << p.retention_mean << ',' << p.rejected_after_n_mean << ',' << p.n_seeds << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

void write_gate_trace_csv(const std::string& path, const std::vector<std::string>& token_text,
                          const GateTrace& trace) {
  if (token_text.size() != trace.mean_gate.size()) {
    throw std::invalid_argument("gate trace: token/trace length mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("gate trace: cannot write " + path);
  out << "token_index,token_string,mean_gate\n";
  for (std::size_t i = 0; i < token_text.size(); ++i) {
    out << i << ',' << token_text[i] << ',' << trace.mean_gate[i] << '\n';
  }
}

void write_audio_trace(const std::string& dir, const EncodedExample& ex,
                       const ImaginationResult& imagination) {
  std::filesystem::create_directories(dir);
  std::ofstream scores(dir + "/trial_scores.csv");
  if (!scores) throw std::runtime_error("audio trace: cannot write trial_scores.csv");
  scores << "span_index,start,end,span_text,status,trial,score\n";
  for (std::size_t i = 0; i < imagination.spans.size(); ++i) {
    const SpanImagination& s = imagination.spans[i];
    std::string span_text;
    for (int t = s.span.start; t <= s.span.end; ++t) {
      if (!span_text.empty()) span_text += ' ';
      span_text += ex.text[static_cast<std::size_t>(t)];
    }
    for (std::size_t trial = 0; trial < s.trial_scores.size(); ++trial) {
      scores << i << ',' << s.span.start << ',' << s.span.end << ',' << span_text << ','
             << (s.status == SpanAudioStatus::kAccepted ? "accepted" : "ignored") << ','
             << trial << ',' << s.trial_scores[trial] << '\n';
    }
    if (s.status == SpanAudioStatus::kAccepted) {
      write_wav(dir + "/span_" + std::to_string(i) + ".wav", s.clip);
    }
  }
}

}  // namespace hearken
