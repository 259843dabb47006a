#include <numeric>

#include "doctest.h"
#include "hearken/checkpoint.hpp"
#include "hearken/spandet.hpp"

using namespace hearken;

namespace {

// brute-force maximal-run scanner, independent of group_spans
std::vector<Span> brute_force_runs(const std::vector<int>& labels) {
  std::vector<Span> out;
  const int n = static_cast<int>(labels.size());
  int i = 0;
  while (i < n) {
    if (labels[static_cast<std::size_t>(i)] == 1) {
      int j = i;
      while (j + 1 < n && labels[static_cast<std::size_t>(j + 1)] == 1) ++j;
      out.push_back({i, j});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

DetectorConfig tiny_cfg(int vocab) {
  DetectorConfig cfg;
  cfg.vocab_size = vocab;
  cfg.seed = 3;
  return cfg;
}

// toy corpus: tokens >= 8 are "audio" words, the rest filler
std::vector<LabeledTokenSeq> toy_data(int n, int vocab, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<LabeledTokenSeq> data;
  for (int i = 0; i < n; ++i) {
    LabeledTokenSeq ex;
    const int len = 6 + static_cast<int>(rng.uniform_index(6));
    for (int t = 0; t < len; ++t) {
      const int tok = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(vocab)));
      ex.tokens.push_back(tok);
      ex.labels.push_back(tok >= 8 ? 1 : 0);
    }
    data.push_back(std::move(ex));
  }
  return data;
}

}  // namespace

TEST_CASE("group_spans hand cases") {
  CHECK(group_spans({0, 1, 1, 0, 1}) == std::vector<Span>{{1, 2}, {4, 4}});
  CHECK(group_spans({0, 0, 0}) == std::vector<Span>{});
  CHECK(group_spans({1, 1, 1, 1, 1}) == std::vector<Span>{{0, 4}});
  CHECK(group_spans({}) == std::vector<Span>{});
  CHECK_THROWS_AS(group_spans({0, 2, 1}), std::invalid_argument);
}

TEST_CASE("group_spans equals brute-force scanner on random vectors") {
  SeededRng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const int len = 1 + static_cast<int>(rng.uniform_index(64));
    std::vector<int> labels(static_cast<std::size_t>(len));
    for (auto& v : labels) v = rng.bernoulli(0.4) ? 1 : 0;
    CHECK(group_spans(labels) == brute_force_runs(labels));
  }
}

TEST_CASE("group_spans(flatten) is the identity; spans disjoint and sorted") {
  SeededRng rng(123);
  for (int i = 0; i < 2000; ++i) {
    const int len = 1 + static_cast<int>(rng.uniform_index(48));
    std::vector<int> labels(static_cast<std::size_t>(len));
    for (auto& v : labels) v = rng.bernoulli(0.5) ? 1 : 0;
    const std::vector<Span> spans = group_spans(labels);
    CHECK(spans_to_labels(spans, len) == labels);
    CHECK(group_spans(spans_to_labels(spans, len)) == spans);
    for (std::size_t s = 1; s < spans.size(); ++s) {
      CHECK(spans[s - 1].end < spans[s].start - 0);    // disjoint
      CHECK(spans[s - 1].start < spans[s].start);      // sorted
      CHECK(spans[s].start > spans[s - 1].end + 0);
    }
  }
}

TEST_CASE("predict: determinism, ranges, near-chance at init") {
  const DetectorModel model(tiny_cfg(16));
  SeededRng rng(4);
  double mean = 0.0;
  int count = 0;
  for (int i = 0; i < 20; ++i) {
    TokenSeq x;
    const int len = 4 + static_cast<int>(rng.uniform_index(8));
    for (int t = 0; t < len; ++t) x.push_back(static_cast<int>(rng.uniform_index(16)));
    const auto p1 = model.predict(x);
    const auto p2 = model.predict(x);
    CHECK(p1 == p2);
    REQUIRE(p1.size() == x.size());
    for (double v : p1) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      mean += v;
      ++count;
    }
  }
  mean /= count;
  CHECK(mean > 0.3);
  CHECK(mean < 0.7);

  CHECK_THROWS_AS(model.predict({}), std::invalid_argument);
  CHECK_THROWS_AS(model.predict(TokenSeq(40, 1)), std::invalid_argument);
}

TEST_CASE("train_detector overfits 16 examples to exact labels") {
  const int vocab = 16;
  const auto data = toy_data(16, vocab, 7);
  DetectorTrainConfig tc;
  tc.epochs = 200;
  tc.seed = 11;
  std::vector<double> curve;
  const DetectorModel model = train_detector(data, tiny_cfg(vocab), tc, &curve);

  CHECK(token_f1(model, data) == doctest::Approx(1.0));
  for (const auto& ex : data) {
    const auto probs = model.predict(ex.tokens);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      CHECK((probs[i] >= 0.5 ? 1 : 0) == ex.labels[i]);
    }
  }

  REQUIRE(curve.size() == 200);
  CHECK(curve[1] < curve[0]);  // loss drops after the first epoch
  // non-increasing trend on the overfit set: compare epoch means in halves
  const double first = std::accumulate(curve.begin(), curve.begin() + 100, 0.0);
  const double second = std::accumulate(curve.begin() + 100, curve.end(), 0.0);
  CHECK(second < first);

  CHECK_THROWS_AS(train_detector({}, tiny_cfg(vocab), tc), std::invalid_argument);
}

TEST_CASE("train_detector generalizes on lexically distinctive tokens") {
  const int vocab = 16;
  const auto train = toy_data(200, vocab, 21);
  const auto dev = toy_data(60, vocab, 22);
  DetectorTrainConfig tc;
  tc.epochs = 30;
  tc.seed = 5;
  const DetectorModel model = train_detector(train, tiny_cfg(vocab), tc);
  CHECK(token_f1(model, dev) >= 0.98);
}

TEST_CASE("detector checkpoint round trip preserves behavior bit-exactly") {
  const auto data = toy_data(16, 16, 31);
  DetectorTrainConfig tc;
  tc.epochs = 20;
  const DetectorModel model = train_detector(data, tiny_cfg(16), tc);

  const std::string bytes = serialize_params(model.params());
  const DetectorModel restored(model.config(), deserialize_params(bytes));
  for (const auto& ex : data) {
    CHECK(model.predict(ex.tokens) == restored.predict(ex.tokens));
  }
  CHECK(model.params().content_hash() == restored.params().content_hash());
}
