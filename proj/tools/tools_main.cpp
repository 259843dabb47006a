// Command-line front end: dataset generation, detector and end-to-end
// training, evaluation, the ablation grid, and the gate/audio trace dumps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hearken/bench.hpp"
#include "hearken/checkpoint.hpp"
#include "hearken/pool.hpp"

namespace fs = std::filesystem;
using namespace hearken;

namespace {

PipelineConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = PipelineConfig::from_json_file(config_path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

DetectorModel load_detector(const std::string& path, const PipelineConfig& cfg,
                            const Benchmark& bench) {
  DetectorModel det(cfg.detector_config(bench.vocab.size()), load_checkpoint(path));
  det.params().set_all_trainable(false);
  return det;
}

ModelBundle load_bundle(const std::string& path, const PipelineConfig& cfg,
                        const Benchmark& bench) {
  return ModelBundle::load(path, cfg.lm_config(bench.vocab.size(),
                                               static_cast<int>(bench.splits.class_names.size())),
                           cfg.fusion_config(), cfg.audio_encoder_config(),
                           cfg.projector_config());
}

void write_eval_records(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "index,label,prediction,correct,imagination_failed,spans,accepted\n";
  for (const auto& r : report.records) {
    int accepted = 0;
    for (auto s : r.span_statuses) accepted += s == SpanAudioStatus::kAccepted;
    out << r.index << ',' << r.label << ',' << r.prediction << ',' << r.correct << ','
        << r.imagination_failed << ',' << r.span_statuses.size() << ',' << accepted << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic auditory-knowledge pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = ".", detector_path, model_path;
  std::string split = "test", task = "pitch";
  std::optional<std::uint64_t> seed;
  bool trace = false;
  int n_train = 2000, n_dev = 300, n_test = 500, n_unseen = 400;
  int concepts_train = 10, concepts_unseen = 6;
  int n_seeds = 5;
  int example_index = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config JSON");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
  add_common(gen);
  gen->add_option("--task", task, "pitch | recognition");
  gen->add_option("--n-train", n_train);
  gen->add_option("--n-dev", n_dev);
  gen->add_option("--n-test", n_test);
  gen->add_option("--n-unseen", n_unseen);
  gen->add_option("--concepts-train", concepts_train);
  gen->add_option("--concepts-unseen", concepts_unseen);

  CLI::App* traindet = app.add_subcommand("train-detector", "train the span detector");
  add_common(traindet);
  traindet->add_option("--data", data_dir, "dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train the fusion model end to end");
  add_common(train);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--detector", detector_path, "frozen detector checkpoint")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained model");
  add_common(eval);
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--detector", detector_path, "frozen detector checkpoint")->required();
  eval->add_option("--model", model_path, "model checkpoint")->required();
  eval->add_option("--split", split, "train | dev | test | unseen");
  eval->add_flag("--trace", trace, "dump per-span WAV files and trial scores");

  CLI::App* ablate = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ablate);
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--seeds", n_seeds, "number of seeds (>= 3)");

  CLI::App* tgate = app.add_subcommand("trace-gate", "dump per-token mean gate values");
  add_common(tgate);
  tgate->add_option("--data", data_dir, "dataset directory")->required();
  tgate->add_option("--detector", detector_path, "frozen detector checkpoint")->required();
  tgate->add_option("--model", model_path, "model checkpoint")->required();
  tgate->add_option("--split", split, "which split to read");
  tgate->add_option("--index", example_index, "example index in the split");

  CLI::App* taudio = app.add_subcommand("trace-audio", "dump per-span generated audio");
  add_common(taudio);
  taudio->add_option("--data", data_dir, "dataset directory")->required();
  taudio->add_option("--detector", detector_path, "frozen detector checkpoint")->required();
  taudio->add_option("--split", split, "which split to read");
  taudio->add_option("--index", example_index, "example index in the split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    fs::create_directories(out_dir);

    if (gen->parsed()) {
      PipelineConfig cfg = load_config(config_path, seed);
      BenchConfig bc;
      bc.task = task_from_string(task);
      bc.n_train = n_train;
      bc.n_dev = n_dev;
      bc.n_test = n_test;
      bc.n_unseen = n_unseen;
      bc.concepts_train = concepts_train;
      bc.concepts_unseen = concepts_unseen;
      bc.seed = cfg.seed;
      SeededRng rng(bc.seed);
      const Benchmark bench = gen_benchmark(bc, MelFilterbank(cfg.mel_config()), rng);
      save_benchmark(out_dir, bench, bc);
      std::cout << "wrote " << to_string(bc.task) << " benchmark to " << out_dir << " ("
                << bench.splits.train.size() << " train, " << bench.splits.dev.size() << " dev, "
                << bench.splits.test.size() << " test, " << bench.splits.unseen.size()
                << " unseen; vocab " << bench.vocab.size() << ")\n";
      return 0;
    }

    if (traindet->parsed()) {
      const PipelineConfig cfg = load_config(config_path, seed);
      const Benchmark bench = load_benchmark(data_dir);
      Pipeline pipeline = make_pipeline(bench, cfg);
      std::vector<double> curve;
      train_pipeline_detector(pipeline, &curve);
      save_checkpoint(out_dir + "/detector.ckpt", pipeline.detector.params());
      cfg.save(out_dir + "/config.json");
      {
        std::ofstream out(out_dir + "/detector_loss.csv");
        out << "epoch,split,loss,accuracy\n";
        for (std::size_t i = 0; i < curve.size(); ++i) {
          out << i << ",train," << curve[i] << ",\n";
        }
      }
      const double dev_f1 =
          token_f1(pipeline.detector, detector_data(bench.splits.dev, bench.vocab));
      std::cout << "detector saved to " << out_dir << "/detector.ckpt (dev token F1 " << dev_f1
                << ")\n";
      return 0;
    }

    if (train->parsed()) {
      const PipelineConfig cfg = load_config(config_path, seed);
      const Benchmark bench = load_benchmark(data_dir);
      Pipeline pipeline = make_pipeline(bench, cfg);
      pipeline.detector = load_detector(detector_path, cfg, bench);
      const auto curve = train_pipeline(pipeline);
      pipeline.bundle.save(out_dir + "/model.ckpt");
      cfg.save(out_dir + "/config.json");
      write_loss_curve_csv(out_dir + "/loss_curve.csv", curve, "train");
      std::cout << "model saved to " << out_dir << "/model.ckpt (final train loss "
                << curve.back().loss << ", accuracy " << curve.back().accuracy << ")\n";
      return 0;
    }

    if (eval->parsed()) {
      const PipelineConfig cfg = load_config(config_path, seed);
      const Benchmark bench = load_benchmark(data_dir);
      Pipeline pipeline = make_pipeline(bench, cfg);
      pipeline.detector = load_detector(detector_path, cfg, bench);
      pipeline.bundle = load_bundle(model_path, cfg, bench);
      const auto& examples = split_by_name(bench.splits, split);
      const EvalReport report = evaluate(pipeline, examples);
      write_eval_records(out_dir + "/eval_" + split + ".csv", report);
      if (trace) {
        for (std::size_t i = 0; i < examples.size(); ++i) {
          const EncodedExample enc = encode_example(examples[i], bench.vocab);
          auto im = imagine_example(pipeline, enc, hash_seed(2, i));
          if (im) {
            write_audio_trace(out_dir + "/trace_" + split + "_" + std::to_string(i), enc, *im);
          }
        }
      }
      std::cout << split << " accuracy " << report.accuracy << " (retention "
                << report.retention() << ") over " << report.records.size() << " examples\n";
      return 0;
    }

    if (ablate->parsed()) {
      PipelineConfig cfg = load_config(config_path, seed);
      if (config_path.empty()) {
        // grid default: an imperfect generator gives the rejection sampler work
        cfg.generator_mode = GeneratorMode::kNoisy;
        cfg.generator_q = 0.3;
      }
      const Benchmark bench = load_benchmark(data_dir);
      AblationConfig ab;
      if (n_seeds < 3) throw std::invalid_argument("ablate: need --seeds >= 3");
      ab.seeds.clear();
      for (int i = 0; i < n_seeds; ++i) ab.seeds.push_back(cfg.seed + 1 + i);
      const AblationReport report = run_ablation(bench, cfg, ab, &std::cout);
      write_ablation_csv(out_dir, report);
      std::cout << "ablation report written to " << out_dir << " (" << report.cells.size()
                << " cells)\n";
      return 0;
    }

    if (tgate->parsed()) {
      const PipelineConfig cfg = load_config(config_path, seed);
      const Benchmark bench = load_benchmark(data_dir);
      Pipeline pipeline = make_pipeline(bench, cfg);
      pipeline.detector = load_detector(detector_path, cfg, bench);
      pipeline.bundle = load_bundle(model_path, cfg, bench);
      const auto& examples = split_by_name(bench.splits, split);
      if (example_index < 0 || example_index >= static_cast<int>(examples.size())) {
        throw std::out_of_range("trace-gate: --index outside the split");
      }
      const EncodedExample enc =
          encode_example(examples[static_cast<std::size_t>(example_index)], bench.vocab);
      auto im = imagine_example(pipeline, enc, hash_seed(2, static_cast<std::uint64_t>(example_index)));
      const ForwardResult fwd =
          forward(pipeline.bundle, enc.tokens, im ? *im : ImaginationResult{});
      const std::string path =
          out_dir + "/gate_trace_" + split + "_" + std::to_string(example_index) + ".csv";
      write_gate_trace_csv(path, enc.text, fwd.trace);
      std::cout << "gate trace written to " << path << "\n";
      return 0;
    }

    if (taudio->parsed()) {
      const PipelineConfig cfg = load_config(config_path, seed);
      const Benchmark bench = load_benchmark(data_dir);
      Pipeline pipeline = make_pipeline(bench, cfg);
      pipeline.detector = load_detector(detector_path, cfg, bench);
      const auto& examples = split_by_name(bench.splits, split);
      if (example_index < 0 || example_index >= static_cast<int>(examples.size())) {
        throw std::out_of_range("trace-audio: --index outside the split");
      }
      const EncodedExample enc =
          encode_example(examples[static_cast<std::size_t>(example_index)], bench.vocab);
      auto im = imagine_example(pipeline, enc, hash_seed(2, static_cast<std::uint64_t>(example_index)));
      if (!im) throw std::runtime_error("trace-audio: imagination failed for this example");
      const std::string dir =
          out_dir + "/audio_trace_" + split + "_" + std::to_string(example_index);
      write_audio_trace(dir, enc, *im);
      std::cout << "audio trace written to " << dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
