#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hearken/config.hpp"
#include "hearken/dataset.hpp"
#include "hearken/encoder.hpp"

namespace hearken {

// A fully assembled run: frozen components (detector, scorer, generator) and
// the trainable bundle, all derived from one PipelineConfig.
struct Pipeline {
  PipelineConfig cfg;
  const Benchmark* bench = nullptr;
  DetectorModel detector;
  AlignmentScorer scorer;
  ModelBundle bundle;

  GeneratorFn generator() const;           // per cfg.generator_*
  GeneratorFn sentence_generator() const;  // sentence-level mode
  ScoreFn score_fn() const;
};

Pipeline make_pipeline(const Benchmark& bench, const PipelineConfig& cfg);

// Trains the token classifier on the train split, then freezes it (registry
// tags flip to non-trainable).
void train_pipeline_detector(Pipeline& pipeline, std::vector<double>* loss_curve = nullptr);

// Imagination for one example, honoring the dki/text_only switches. `stream`
// seeds the per-example generator rng. Returns nullopt when every span of
// the example failed to generate (recorded as a failure by callers).
std::optional<ImaginationResult> imagine_example(const Pipeline& pipeline,
                                                 const EncodedExample& ex, std::uint64_t stream);

std::vector<TrainExample> prepare_train_set(const Pipeline& pipeline,
                                            const std::vector<Example>& split);

std::vector<EpochStats> train_pipeline(Pipeline& pipeline);

struct EvalRecord {
  int index = 0;
  int label = 0;
  int prediction = 0;
  bool correct = false;
  bool imagination_failed = false;
  std::vector<SpanAudioStatus> span_statuses;
  std::vector<std::vector<double>> trial_scores;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<EvalRecord> records;

  long spans_total() const;
  long spans_accepted() const;
  double retention() const;         // accepted / total detected spans
  double rejected_after_n() const;  // 1 - retention
};

EvalReport evaluate(const Pipeline& pipeline, const std::vector<Example>& split,
                    std::uint64_t stream_salt = 0);

// detector training + imagination + end-to-end training + evaluation
struct RunResult {
  double dev_acc = 0.0;
  double test_acc = 0.0;
  double unseen_acc = 0.0;
  double unseen_retention = 1.0;
  double unseen_rejected_after_n = 0.0;
  double detector_dev_f1 = 0.0;
  std::vector<EpochStats> curve;
};
RunResult run_pipeline(const Benchmark& bench, PipelineConfig cfg,
                       const DetectorModel* shared_detector = nullptr);

// ---------------------------------------------------------------------------
// Ablation harness

enum class AblationVariant { kFull, kNoRejection, kNoFusionGate, kNoDki, kNoDkiNoFusionGate };
std::string to_string(AblationVariant v);
PipelineConfig apply_variant(PipelineConfig cfg, AblationVariant v);

struct AblationCell {
  std::string variant;
  std::string split;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int n_seeds = 0;
  std::vector<double> per_seed;
};

struct SweepPoint {
  double tau = 0.0;
  int max_trials = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double retention_mean = 0.0;
  double rejected_after_n_mean = 0.0;
  int n_seeds = 0;
};

struct AblationReport {
  std::vector<AblationCell> cells;       // variant x {test, unseen}
  std::vector<SweepPoint> tau_sweep;     // accuracy + rejected-after-n per tau
  std::vector<SweepPoint> trial_sweep;   // same per n
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> tau_grid{-1.0, 0.0, 0.3, 0.6, 0.9};
  std::vector<int> trial_grid{1, 2, 3};
  int sweep_seeds = 3;  // seeds used for the grid sweeps (first k of seeds)
};

// Trains and evaluates every variant and sweep cell in a worker pool
// (ITH_THREADS caps it); failed cells are recorded and skipped, not fatal.
AblationReport run_ablation(const Benchmark& bench, const PipelineConfig& base,
                            const AblationConfig& ab, std::ostream* log = nullptr);

void write_ablation_csv(const std::string& dir, const AblationReport& report);

// ---------------------------------------------------------------------------
// Trace helpers (case-study workflows)

// per-token mean gate values, one CSV row per token
void write_gate_trace_csv(const std::string& path, const std::vector<std::string>& token_text,
                          const GateTrace& trace);

// dumps accepted span clips as WAV files plus a trial-score CSV
void write_audio_trace(const std::string& dir, const EncodedExample& ex,
                       const ImaginationResult& imagination);

}  // namespace hearken
