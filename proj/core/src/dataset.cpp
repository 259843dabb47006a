#include "hearken/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hearken {

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus) {
  std::set<std::string> uniq;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) uniq.insert(tok);
  }
  uniq.erase(kCls);
  Vocab v;
  v.words_.push_back(kCls);
  v.words_.insert(v.words_.end(), uniq.begin(), uniq.end());
  for (std::size_t i = 0; i < v.words_.size(); ++i) v.index_[v.words_[i]] = static_cast<int>(i);
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw std::out_of_range("vocab: unknown token '" + word + "'");
  return it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab: id " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocab: cannot write " + path);
  for (const auto& w : words_) out << w << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocab: cannot read " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.index_[line] = static_cast<int>(v.words_.size());
    v.words_.push_back(line);
  }
  if (v.words_.empty() || v.words_[0] != kCls) {
    throw std::runtime_error("vocab: file must start with " + std::string(kCls));
  }
  return v;
}

TaskKind task_from_string(const std::string& s) {
  if (s == "pitch") return TaskKind::kPitch;
  if (s == "recognition") return TaskKind::kRecognition;
  throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(TaskKind task) {
  return task == TaskKind::kPitch ? "pitch" : "recognition";
}

EncodedExample encode_example(const Example& ex, const Vocab& vocab) {
  EncodedExample out;
  out.tokens.push_back(vocab.cls_id());
  out.text.push_back(Vocab::kCls);
  for (const auto& tok : ex.tokens) {
    out.tokens.push_back(vocab.id(tok));
    out.text.push_back(tok);
  }
  out.gold_labels.assign(out.tokens.size(), 0);
  for (const Span& s : ex.gold_spans) {
    out.gold_spans.push_back({s.start + 1, s.end + 1});
    for (int i = s.start + 1; i <= s.end + 1; ++i) out.gold_labels[static_cast<std::size_t>(i)] = 1;
  }
  out.label_id = ex.label_id;
  return out;
}

namespace {

// Fixed-slot templates with filler variety. "of", "than" and "hear" cue the
// concept slots, and only those slots; the detector can key on context for
// concepts it never saw.
const std::vector<std::vector<std::string>> kPitchTemplates = {
    {"the", "sound", "of", "<A>", "is", "[mask]", "than", "<B>"},
    {"<F>", "says", "the", "tone", "of", "<A>", "seems", "[mask]", "than", "<B>"},
    {"in", "the", "<F>", "the", "hum", "of", "<A>", "was", "[mask]", "than", "<B>", "today"},
};

const std::vector<std::vector<std::string>> kRecognitionTemplates = {
    {"you", "can", "hear", "<A>", "near", "the", "<F>"},
    {"the", "recording", "of", "<A>", "was", "clear"},
    {"<F>", "noticed", "the", "call", "of", "<A>", "outside"},
};

const std::vector<std::string> kFillers = {"kitchen", "garden", "workshop", "street", "meadow",
                                           "attic",   "harbor", "cellar",   "market", "forest"};

Example instantiate(const std::vector<std::string>& tmpl, const std::string& a,
                    const std::string& b, SeededRng& rng) {
  Example ex;
  for (const auto& slot : tmpl) {
    if (slot == "<A>") {
      ex.gold_spans.push_back({static_cast<int>(ex.tokens.size()),
                               static_cast<int>(ex.tokens.size())});
      ex.tokens.push_back(a);
    } else if (slot == "<B>") {
      ex.gold_spans.push_back({static_cast<int>(ex.tokens.size()),
                               static_cast<int>(ex.tokens.size())});
      ex.tokens.push_back(b);
    } else if (slot == "<F>") {
      ex.tokens.push_back(kFillers[rng.uniform_index(kFillers.size())]);
    } else {
      ex.tokens.push_back(slot);
    }
  }
  return ex;
}

std::vector<Example> make_pitch_split(int count, const std::vector<int>& pool,
                                      const Lexicon& lex, SeededRng& rng) {
  if (pool.size() < 2) throw std::invalid_argument("pitch split needs >= 2 concepts");
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int a = pool[rng.uniform_index(pool.size())];
    int b = a;
    while (b == a) b = pool[rng.uniform_index(pool.size())];
    // alternate target labels for exact balance; swap operands to match
    const bool want_lower = i % 2 == 0;
    const bool a_lower = lex.by_id(a).freq_hz < lex.by_id(b).freq_hz;
    if (want_lower != a_lower) std::swap(a, b);

    const auto& tmpl = kPitchTemplates[rng.uniform_index(kPitchTemplates.size())];
    Example ex = instantiate(tmpl, lex.by_id(a).surface[0], lex.by_id(b).surface[0], rng);
    ex.concept_ids = {a, b};
    ex.label = want_lower ? "lower" : "higher";
    ex.label_id = want_lower ? 1 : 0;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> make_recognition_split(int count, const std::vector<int>& pool,
                                            const Lexicon& lex, SeededRng& rng) {
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int c = pool[static_cast<std::size_t>(i) % pool.size()];  // round robin: exact balance
    const auto& tmpl = kRecognitionTemplates[rng.uniform_index(kRecognitionTemplates.size())];
    Example ex = instantiate(tmpl, lex.by_id(c).surface[0], "", rng);
    ex.concept_ids = {c};
    ex.label = lex.by_id(c).surface[0];
    ex.label_id = c;
    out.push_back(std::move(ex));
  }
  rng.shuffle(out);
  return out;
}

}  // namespace

Benchmark gen_benchmark(const BenchConfig& cfg, const MelFilterbank& fb, SeededRng& rng) {
  if (cfg.concepts_train < 2 && cfg.task == TaskKind::kPitch) {
    throw std::invalid_argument("gen_benchmark: pitch needs >= 2 train concepts");
  }
  if (cfg.concepts_train + cfg.concepts_unseen < 2 || cfg.concepts_train < 1) {
    throw std::invalid_argument("gen_benchmark: too few concepts");
  }
  if (cfg.task == TaskKind::kPitch && cfg.concepts_unseen == 1) {
    throw std::invalid_argument("gen_benchmark: unseen pitch split needs 0 or >= 2 concepts");
  }
  if (cfg.n_train < 1) throw std::invalid_argument("gen_benchmark: split sizes must be positive");

  Benchmark bench;
  bench.lexicon = make_lexicon(cfg.concepts_train, cfg.concepts_unseen, fb, rng);
  const std::vector<int> train_pool = bench.lexicon.train_ids();
  const std::vector<int> unseen_pool = bench.lexicon.unseen_ids();

  bench.splits.task = cfg.task;
  if (cfg.task == TaskKind::kPitch) {
    bench.splits.class_names = {"higher", "lower"};
    bench.splits.train = make_pitch_split(cfg.n_train, train_pool, bench.lexicon, rng);
    bench.splits.dev = make_pitch_split(cfg.n_dev, train_pool, bench.lexicon, rng);
    bench.splits.test = make_pitch_split(cfg.n_test, train_pool, bench.lexicon, rng);
    if (cfg.concepts_unseen >= 2) {
      bench.splits.unseen = make_pitch_split(cfg.n_unseen, unseen_pool, bench.lexicon, rng);
    }
  } else {
    for (const auto& c : bench.lexicon.concepts()) bench.splits.class_names.push_back(c.surface[0]);
    bench.splits.train = make_recognition_split(cfg.n_train, train_pool, bench.lexicon, rng);
    bench.splits.dev = make_recognition_split(cfg.n_dev, train_pool, bench.lexicon, rng);
    bench.splits.test = make_recognition_split(cfg.n_test, train_pool, bench.lexicon, rng);
    if (cfg.concepts_unseen >= 1) {
      bench.splits.unseen = make_recognition_split(cfg.n_unseen, unseen_pool, bench.lexicon, rng);
    }
  }

  std::vector<std::vector<std::string>> corpus;
  for (const auto* split :
       {&bench.splits.train, &bench.splits.dev, &bench.splits.test, &bench.splits.unseen}) {
    for (const auto& ex : *split) corpus.push_back(ex.tokens);
  }
  bench.vocab = Vocab::build(corpus);
  return bench;
}

const std::vector<Example>& split_by_name(const BenchSplits& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "dev") return splits.dev;
  if (name == "test") return splits.test;
  if (name == "unseen") return splits.unseen;
  throw std::invalid_argument("unknown split: " + name);
}

namespace {

void save_split(const std::string& path, const std::vector<Example>& split) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  for (const auto& ex : split) {
    nlohmann::json j;
    j["tokens"] = ex.tokens;
    auto spans = nlohmann::json::array();
    for (const Span& s : ex.gold_spans) spans.push_back({s.start, s.end});
    j["spans"] = spans;
    j["label"] = ex.label;
    j["label_id"] = ex.label_id;
    j["concepts"] = ex.concept_ids;
    out << j.dump() << '\n';
  }
}

std::vector<Example> load_split(const std::string& path) {
  std::vector<Example> out;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot read " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Example ex;
    ex.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& s : j.at("spans")) ex.gold_spans.push_back({s.at(0), s.at(1)});
    ex.label = j.at("label").get<std::string>();
    ex.label_id = j.at("label_id").get<int>();
    ex.concept_ids = j.at("concepts").get<std::vector<int>>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void save_benchmark(const std::string& dir, const Benchmark& bench, const BenchConfig& cfg) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["task"] = to_string(bench.splits.task);
  meta["class_names"] = bench.splits.class_names;
  meta["seed"] = cfg.seed;
  meta["concepts_train"] = cfg.concepts_train;
  meta["concepts_unseen"] = cfg.concepts_unseen;
  std::ofstream meta_out(dir + "/meta.json");
  if (!meta_out) throw std::runtime_error("dataset: cannot write meta.json");
  meta_out << meta.dump(2) << '\n';

  bench.lexicon.save(dir + "/lexicon.jsonl");
  bench.vocab.save(dir + "/vocab.txt");
  save_split(dir + "/train.jsonl", bench.splits.train);
  save_split(dir + "/dev.jsonl", bench.splits.dev);
  save_split(dir + "/test.jsonl", bench.splits.test);
  save_split(dir + "/unseen.jsonl", bench.splits.unseen);
}

Benchmark load_benchmark(const std::string& dir) {
  std::ifstream meta_in(dir + "/meta.json");
  if (!meta_in) throw std::runtime_error("dataset: cannot read " + dir + "/meta.json");
  nlohmann::json meta;
  meta_in >> meta;

  Benchmark bench;
  bench.splits.task = task_from_string(meta.at("task").get<std::string>());
  bench.splits.class_names = meta.at("class_names").get<std::vector<std::string>>();
  bench.lexicon = Lexicon::load(dir + "/lexicon.jsonl");
  bench.vocab = Vocab::load(dir + "/vocab.txt");
  bench.splits.train = load_split(dir + "/train.jsonl");
  bench.splits.dev = load_split(dir + "/dev.jsonl");
  bench.splits.test = load_split(dir + "/test.jsonl");
  bench.splits.unseen = load_split(dir + "/unseen.jsonl");
  return bench;
}

std::vector<LabeledTokenSeq> detector_data(const std::vector<Example>& split, const Vocab& vocab) {
  std::vector<LabeledTokenSeq> out;
  out.reserve(split.size());
  for (const auto& ex : split) {
    const EncodedExample enc = encode_example(ex, vocab);
    out.push_back({enc.tokens, enc.gold_labels});
  }
  return out;
}

}  // namespace hearken
