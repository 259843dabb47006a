#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hearken/audio.hpp"
#include "hearken/spandet.hpp"

namespace hearken {

class Vocab {
 public:
  static constexpr const char* kCls = "[cls]";

  // [cls] first, then the corpus tokens sorted and deduplicated
  static Vocab build(const std::vector<std::vector<std::string>>& corpus);

  int id(const std::string& word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  int cls_id() const { return 0; }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

enum class TaskKind { kPitch, kRecognition };
TaskKind task_from_string(const std::string& s);
std::string to_string(TaskKind task);

struct Example {
  std::vector<std::string> tokens;  // raw template expansion, no [cls]
  std::vector<Span> gold_spans;     // over raw tokens, exactly the concept words
  std::string label;
  int label_id = 0;
  std::vector<int> concept_ids;     // lexicon ids behind the spans, in order
};

// Model-facing view: [cls] is prepended, spans shift by one, gold labels are
// per encoded token.
struct EncodedExample {
  TokenSeq tokens;
  std::vector<std::string> text;
  std::vector<Span> gold_spans;
  std::vector<int> gold_labels;
  int label_id = 0;
};
EncodedExample encode_example(const Example& ex, const Vocab& vocab);

struct BenchConfig {
  TaskKind task = TaskKind::kPitch;
  int n_train = 2000;
  int n_dev = 300;
  int n_test = 500;
  int n_unseen = 400;
  int concepts_train = 10;
  int concepts_unseen = 6;
  std::uint64_t seed = 0;
};

struct BenchSplits {
  TaskKind task = TaskKind::kPitch;
  std::vector<Example> train, dev, test, unseen;
  std::vector<std::string> class_names;
};

struct Benchmark {
  BenchSplits splits;
  Lexicon lexicon;
  Vocab vocab;
};

// Balanced synthetic benchmark over a freshly drawn lexicon. Pitch examples
// compare two concepts ("... of <A> is [mask] than <B> ..."); recognition
// examples name one concept and classify it. The unseen split draws its
// concepts exclusively from the held-out lexicon partition.
Benchmark gen_benchmark(const BenchConfig& cfg, const MelFilterbank& fb, SeededRng& rng);

const std::vector<Example>& split_by_name(const BenchSplits& splits, const std::string& name);

void save_benchmark(const std::string& dir, const Benchmark& bench, const BenchConfig& cfg);
Benchmark load_benchmark(const std::string& dir);

// detector training view of a split
std::vector<LabeledTokenSeq> detector_data(const std::vector<Example>& split, const Vocab& vocab);

}  // namespace hearken
