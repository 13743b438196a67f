#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "kn_oracle.hpp"
#include "swm/lexicon.hpp"
#include "swm/ngram.hpp"

using namespace swm;
using namespace swm::testing;

TEST_CASE("bigram on 'a b / a b' by hand") {
  auto m = NGramModel::train({{"a", "b"}, {"a", "b"}}, 2);
  // Bigram counts are all 2 and unigram continuation counts all 1, so both
  // discount estimates are undefined and fall back to 0.75.
  CHECK(m.discount(1) == 0.75);
  CHECK(m.discount(2) == 0.75);
  // P1(b) = 0.25/3 + 0.75 * 3/3 * 1/4; P2(b|a) = 1.25/2 + 0.75 * 1/2 * P1(b)
  const double p1 = 0.25 / 3 + 0.75 / 4;
  CHECK(std::abs(m.prob(Gram{"a"}, "b") - (0.625 + 0.375 * p1)) < 1e-12);
  CHECK(std::abs(m.prob(Gram{"a"}, "b") - 0.7265625) < 1e-12);
  KnOracle oracle({{"a", "b"}, {"a", "b"}}, 2);
  CHECK(std::abs(oracle.prob({"a"}, "b") - 0.7265625) < 1e-12);
}

TEST_CASE("token table and counts") {
  auto m = NGramModel::train({{"b", "a"}, {"a", "c"}}, 3);
  CHECK(m.tokens() == std::vector<std::string>{"<s>", "</s>", "<unk>", "a", "b", "c"});
  CHECK(m.predictable_size() == 5);
  CHECK(m.id("zzz") == 2);
  CHECK(m.count({m.id("<s>"), m.id("b"), m.id("a")}) == 1);
  // "a" follows both "b" and "<s>", so its continuation count is 2.
  CHECK(m.count({m.id("a")}) == 2);
  CHECK(m.count({m.id("<s>"), m.id("a")}) == 1);
}

TEST_CASE("discounts follow count-of-counts when both are present") {
  Sentences corpus = {{"a", "b"}, {"a", "b"}, {"a", "c"}, {"b", "c"}};
  auto m = NGramModel::train(corpus, 2);
  KnOracle oracle(corpus, 2);
  for (std::size_t n = 1; n <= 2; ++n) {
    CHECK(m.discount(n) == doctest::Approx(oracle.discount(n)).epsilon(1e-15));
    CHECK(m.discount(n) > 0);
    CHECK(m.discount(n) < 1);
  }
  // Bigram counts: <s> a:3, a b:2, b </s>:2, a c:1, c </s>:2, <s> b:1, b c:1
  CHECK(m.discount(2) == doctest::Approx(3.0 / (3 + 2 * 3)));
}

TEST_CASE("random tiny corpora: normalization and oracle agreement") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto corpus = random_corpus(rng, 20, 1 + trial % 8);
    const std::size_t order = 1 + trial % 3;
    auto m = NGramModel::train(corpus, order);
    KnOracle oracle(corpus, order);
    for (const auto& h : all_histories(m, order - 1)) {
      double sum = 0;
      for (const auto& w : oracle.predictable) {
        const double p = m.prob(h, w);
        CHECK(p > 0);
        CHECK(std::abs(p - oracle.prob(h, w)) <= 1e-12);
        sum += p;
      }
      CHECK(std::abs(sum - 1) <= 1e-6);
    }
  }
}

TEST_CASE("unigram model is normalized and unseen contexts back off") {
  auto uni = NGramModel::train({{"x", "y", "x"}}, 1);
  std::vector<std::int32_t> none;
  auto d = uni.distribution(none);
  double s = 0;
  for (double p : d) s += p;
  CHECK(std::abs(s - 1) <= 1e-9);

  auto five = NGramModel::train({{"the", "cat", "sat", "on", "the", "mat"}}, 5);
  const double p = five.prob(Gram{"mat", "on", "cat", "the"}, "sat");
  CHECK(p > 0);
  CHECK(p < 1);
  CHECK(five.prob(Gram{"q", "r", "s", "t"}, "zz") > 0);
}

TEST_CASE("prob and scoring errors") {
  auto m = NGramModel::train({{"a"}}, 2);
  std::vector<std::int32_t> none;
  CHECK_THROWS_AS(m.prob(none, 0), std::out_of_range);
  CHECK_THROWS_AS(m.prob(none, 99), std::out_of_range);
  CHECK_THROWS_AS(m.average_logprob({}), std::invalid_argument);
  CHECK_THROWS_AS(NGramModel::train({{"a"}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(NGramModel::train({}, 2), std::invalid_argument);
  CHECK_THROWS_AS(NGramModel{}.prob(none, 1), std::logic_error);
}

TEST_CASE("average_logprob") {
  Sentences corpus = {{"the", "cat", "sees", "a", "dog"}};
  auto m = NGramModel::train(corpus, 3);
  const double fwd = m.average_logprob(corpus[0]);
  const double rev = m.average_logprob({"dog", "a", "sees", "cat", "the"});
  CHECK(fwd > rev);
  KnOracle oracle(corpus, 3);
  Gram padded = {"<s>", "<s>", "the", "cat", "sees", "a", "dog", "</s>"};
  double total = 0;
  for (std::size_t i = 2; i < padded.size(); ++i) total += std::log(oracle.prob({padded[i - 2], padded[i - 1]}, padded[i]));
  CHECK(std::abs(fwd - total / 6) < 1e-12);
  const double junk = m.average_logprob({"qq", "zz", "xx"});
  CHECK(std::isfinite(junk));
  CHECK(junk < rev);
}

TEST_CASE("save/load round-trip") {
  auto m = NGramModel::train({{"a", "b", "c"}, {"b", "c", "a", "a"}, {"c"}}, 3);
  std::ostringstream out;
  m.save(out);
  std::istringstream in(out.str());
  auto back = NGramModel::load(in);
  CHECK(back == m);
  for (const auto& h : all_histories(m, 2))
    for (const auto& w : {"a", "b", "c", "</s>", "<unk>"}) CHECK(back.prob(h, w) == m.prob(h, w));
  std::ostringstream again;
  back.save(again);
  CHECK(again.str() == out.str());

  std::istringstream bad("swm-kneser-ney 2\n");
  CHECK_THROWS_AS(NGramModel::load(bad), ParseError);
  std::string text = out.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(NGramModel::load(truncated), ParseError);
}

TEST_CASE("fit_threshold examples") {
  std::vector<double> s = {-1, -2, -5, -6};
  std::vector<int> l = {1, 1, 0, 0};
  auto clf = fit_threshold(s, l);
  CHECK(clf.threshold == -3.5);
  CHECK(clf.validation_accuracy == 1.0);

  std::vector<double> inter = {1, 2, 3, 4, 5, 6};
  std::vector<int> il = {1, 0, 1, 0, 1, 0};
  auto ic = fit_threshold(inter, il);
  CHECK(ic.validation_accuracy < 1.0);
  CHECK(ic.validation_accuracy == sweep_oracle(inter, il).second);

  std::vector<double> flat = {-2, -2, -2, -2};
  auto fc = fit_threshold(flat, l);
  CHECK(fc.validation_accuracy == 0.5);

  std::vector<int> one_class = {1, 1, 1, 1};
  CHECK_THROWS_AS(fit_threshold(s, one_class), std::invalid_argument);
  std::vector<int> short_labels = {1, 0};
  CHECK_THROWS_AS(fit_threshold(s, short_labels), std::invalid_argument);
  std::vector<double> nan = {1, std::nan(""), 2, 3};
  CHECK_THROWS_AS(fit_threshold(nan, l), std::invalid_argument);

  ThresholdClassifier at{-3.5, 1.0};
  CHECK(at.classify(-3.5) == 1);
  CHECK(at.classify(std::nextafter(-3.5, -10.0)) == 0);
}

TEST_CASE("fit_threshold equals an exhaustive sweep") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so that ties occur.
      scores[i] = -static_cast<double>(rng() % 12) / 2.0;
      labels[i] = static_cast<int>(rng() % 2);
    }
    labels[0] = 0;
    labels[1] = 1;
    auto clf = fit_threshold(scores, labels);
    auto [t, acc] = sweep_oracle(scores, labels);
    CHECK(clf.validation_accuracy == acc);
    CHECK(clf.threshold == t);
    CHECK(threshold_accuracy(scores, labels, clf.threshold) == acc);
  }
}

TEST_CASE("threshold classifier on a toy setup") {
  Sentences train = {{"the", "cat", "sleeps"}, {"the", "dog", "runs"}, {"a", "cat", "runs"}};
  auto m = NGramModel::train(train, 3);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : train) {
    scores.push_back(m.average_logprob(s));
    labels.push_back(1);
    auto r = s;
    std::reverse(r.begin(), r.end());
    scores.push_back(m.average_logprob(r));
    labels.push_back(0);
  }
  auto clf = fit_threshold(scores, labels);
  CHECK(clf.validation_accuracy == 1.0);
  for (const auto& s : train) CHECK(clf.classify(m.average_logprob(s)) == 1);
  CHECK(clf.classify(m.average_logprob({"blorp", "fnord", "quux"})) == 0);
}

TEST_CASE("generate_sentence") {
  auto m = NGramModel::train({{"a", "b", "c"}, {"a", "b", "d"}, {"a", "b", "c"}}, 3);
  GenerateOptions argmax;
  argmax.argmax = true;
  std::mt19937_64 rng(1);
  CHECK(generate_sentence(m, argmax, rng) == std::vector<std::string>{"a", "b", "c"});

  GenerateOptions forced;
  forced.min_length = 5;
  forced.max_length = 5;
  for (int k = 0; k < 20; ++k) CHECK(generate_sentence(m, forced, rng).size() == 5);

  GenerateOptions capped;
  capped.max_length = 2;
  capped.argmax = true;
  CHECK(generate_sentence(m, capped, rng) == std::vector<std::string>{"a", "b"});
}
