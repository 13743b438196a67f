#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <sstream>

#include "support.hpp"
#include "swm/datagen.hpp"
#include "swm/lexicon.hpp"
#include "swm/ngram.hpp"

using namespace swm;
using swm::testing::perturbation_violation;

namespace {

TaggedSentence tagged(const std::string& line, std::size_t provenance = 1) {
  std::istringstream in(line + "\n");
  auto c = parse_corpus(in);
  REQUIRE(c.sentences.size() == 1);
  auto s = c.sentences[0];
  s.provenance = provenance;
  return s;
}

std::string joined(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) out += (out.empty() ? "" : " ") + t;
  return out;
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream out;
  write_dataset(out, d);
  return out.str();
}

// Ten long sentences with plenty of same-tag words.
std::vector<TaggedSentence> ten_sentences() {
  std::vector<TaggedSentence> out;
  for (std::size_t i = 0; i < 10; ++i)
    out.push_back(tagged("the_DT red_JJ cat_NN saw_VB the_DT blue_JJ dog_NN near_IN a_DT tall_JJ tree" +
                             std::to_string(i) + "_NN ._PU",
                         i + 1));
  return out;
}

}  // namespace

TEST_CASE("parse_corpus") {
  std::istringstream in("the_DT cat_NN sleeps_VB\n\n  \nNew_York_NNP is_VB big_JJ\n");
  auto c = parse_corpus(in);
  REQUIRE(c.sentences.size() == 2);
  CHECK(c.skipped_empty == 2);
  CHECK(c.sentences[0].tokens ==
        std::vector<TaggedToken>{{"the", "DT"}, {"cat", "NN"}, {"sleeps", "VB"}});
  CHECK(c.sentences[0].provenance == 1);
  CHECK(c.sentences[1].tokens[0] == TaggedToken{"New_York", "NNP"});
  CHECK(c.sentences[1].provenance == 4);

  std::istringstream bad("the_DT cat_NN\nthe cat_NN\n");
  try {
    parse_corpus(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream empty_tag("cat_\n");
  CHECK_THROWS_AS(parse_corpus(empty_tag), ParseError);

  std::ostringstream out;
  auto again = ten_sentences();
  write_corpus(out, again);
  std::istringstream back(out.str());
  auto parsed = parse_corpus(back);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(parsed.sentences[i].tokens == again[i].tokens);
}

TEST_CASE("perturb mode names") {
  CHECK(parse_perturb_mode("dataset1") == PerturbMode::kReplace1);
  CHECK(parse_perturb_mode("dataset2") == PerturbMode::kReplace2);
  CHECK(parse_perturb_mode("dataset3") == PerturbMode::kSwapSamePos);
  CHECK(parse_perturb_mode("dataset4") == PerturbMode::kSwapRandom);
  for (auto m : {PerturbMode::kReplace1, PerturbMode::kReplace2, PerturbMode::kSwapSamePos, PerturbMode::kSwapRandom,
                 PerturbMode::kMixed, PerturbMode::kLmGen})
    CHECK(parse_perturb_mode(perturb_mode_name(m)) == m);
  CHECK_FALSE(parse_perturb_mode("swap").has_value());
}

TEST_CASE("swap_positions") {
  auto s = tagged("the_DT red_JJ cat_NN saw_VB the_DT blue_JJ dog_NN");
  CHECK(joined(swap_positions(s, 1, 5).surfaces()) == "the blue cat saw the red dog");
  CHECK_THROWS_AS(swap_positions(s, 1, 7), std::out_of_range);
}

TEST_CASE("swap-same-pos reaches exactly the same-tag pairs") {
  auto s = tagged("the_DT red_JJ cat_NN saw_VB a_DT blue_JJ dog_NN and_CC left_VBD ._PU");
  PerturbPolicy policy;
  policy.min_length = 8;
  std::mt19937_64 rng(1);
  // Pairs sharing a tag with different surfaces: (the, a), (red, blue), (cat, dog).
  std::set<std::string> seen;
  for (int k = 0; k < 50; ++k) {
    auto out = perturb(s, PerturbMode::kSwapSamePos, policy, {}, rng);
    REQUIRE(out.example);
    CHECK(out.example->source == SourceOp::kSwapSamePos);
    seen.insert(joined(out.example->tokens));
  }
  CHECK(seen == std::set<std::string>{"a red cat saw the blue dog and left .", "the blue cat saw a red dog and left .",
                                      "the red dog saw a blue cat and left ."});
}

TEST_CASE("perturb skips") {
  PerturbPolicy policy;
  std::mt19937_64 rng(1);
  auto short_one = tagged("the_DT cat_NN sat_VB on_IN mats_NN");
  CHECK(perturb(short_one, PerturbMode::kReplace1, policy, {}, rng).skip_reason == "too short");
  // Exactly min_length tokens is still too short.
  auto eight = tagged("a_DT b_NN c_VB d_IN e_JJ f_RB g_CC h_NNS");
  CHECK(perturb(eight, PerturbMode::kSwapRandom, policy, {}, rng).skip_reason == "too short");

  auto only_punct_repeats = tagged("a_DT b_NN ,_PU c_VB ,_PU d_IN e_JJ f_RB g_CC ._PU");
  CHECK(perturb(only_punct_repeats, PerturbMode::kSwapSamePos, policy, {}, rng).skip_reason == "no same-POS pair");
  CHECK(perturb(only_punct_repeats, PerturbMode::kReplace1, policy, {}, rng).skip_reason ==
        "no replaceable position");

  auto all_punct = tagged("._PU ,_PU ._PU ,_PU ._PU ,_PU ._PU ,_PU ._PU");
  CHECK(perturb(all_punct, PerturbMode::kSwapRandom, policy, {}, rng).skip_reason == "no swappable pair");

  CHECK_THROWS_AS(perturb(only_punct_repeats, PerturbMode::kMixed, policy, {}, rng), std::invalid_argument);
}

TEST_CASE("replacement draws come from the training index and never repeat the surface") {
  auto s = tagged("the_DT red_JJ cat_NN saw_VB the_DT blue_JJ dog_NN near_IN a_DT tree_NN ._PU");
  PosIndex index = {{"NN", {"cat", "fish"}}, {"JJ", {"red"}}};
  PerturbPolicy policy;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    auto out = perturb(s, PerturbMode::kReplace1, policy, index, rng);
    CHECK(perturbation_violation(s, out, PerturbMode::kReplace1, policy, index) == "");
    const auto pos = out.changed.at(0);
    // blue -> red or a noun -> cat/fish; red itself has no alternative.
    CHECK(pos != 1);
  }
  auto two = perturb(s, PerturbMode::kReplace2, policy, index, rng);
  CHECK(perturbation_violation(s, two, PerturbMode::kReplace2, policy, index) == "");
}

TEST_CASE("perturbation properties on random corpora") {
  std::mt19937_64 gen(21);
  const auto corpus = swm::testing::random_tagged_corpus(gen, 300, 9, 18);
  PerturbPolicy policy;
  policy.punctuation_tags = {"PU"};
  const auto index = build_pos_index(corpus, policy.punctuation_tags);
  CHECK_FALSE(index.count("PU"));
  for (auto op : {PerturbMode::kReplace1, PerturbMode::kReplace2, PerturbMode::kSwapSamePos, PerturbMode::kSwapRandom}) {
    CAPTURE(perturb_mode_name(op));
    std::size_t made = 0;
    for (const auto& s : corpus) {
      auto rng = sentence_rng(9, s.provenance);
      auto out = perturb(s, op, policy, index, rng);
      if (!out.example) continue;
      ++made;
      CHECK(perturbation_violation(s, out, op, policy, index) == "");
      CHECK(out.example->provenance == s.provenance);
    }
    CHECK(made > 250);
  }
}

TEST_CASE("build_dataset: split sizes, balance, provenance") {
  PerturbPolicy policy;
  policy.mode = PerturbMode::kSwapSamePos;
  auto splits = build_dataset(ten_sentences(), policy, SplitRatios{});
  CHECK(splits.train.size() == 16);
  CHECK(splits.valid.size() == 2);
  CHECK(splits.test.size() == 2);
  CHECK(splits.skipped == 0);
  std::map<std::size_t, int> owner;
  int split_id = 0;
  for (const Dataset* d : {&splits.train, &splits.valid, &splits.test}) {
    auto counts = count_labels(*d);
    CHECK(counts.positive == counts.negative);
    for (std::size_t i = 0; i < d->size(); i += 2) {
      CHECK((*d)[i].label == 1);
      CHECK((*d)[i].source == SourceOp::kNone);
      CHECK((*d)[i + 1].label == 0);
      CHECK((*d)[i + 1].source == SourceOp::kSwapSamePos);
      CHECK((*d)[i].provenance == (*d)[i + 1].provenance);
    }
    for (const auto& ex : *d) {
      auto [it, fresh] = owner.emplace(ex.provenance, split_id);
      CHECK(it->second == split_id);
    }
    ++split_id;
  }
  CHECK(owner.size() == 10);

  CHECK_THROWS_AS(build_dataset(ten_sentences(), policy, SplitRatios{0.5, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(build_dataset({}, policy, SplitRatios{}), std::invalid_argument);
  CHECK_THROWS_AS(build_dataset(ten_sentences(), policy, SplitRatios{}, std::array<std::size_t, 3>{9, 1, 1}),
                  std::invalid_argument);
  auto capped = build_dataset(ten_sentences(), policy, SplitRatios{}, std::array<std::size_t, 3>{3, 1, 1});
  CHECK(capped.train.size() == 6);
}

TEST_CASE("build_dataset is deterministic and seed-sensitive") {
  std::mt19937_64 gen(5);
  const auto corpus = swm::testing::random_tagged_corpus(gen, 200, 6, 16);
  for (auto mode : {PerturbMode::kMixed, PerturbMode::kReplace1, PerturbMode::kSwapRandom, PerturbMode::kLmGen}) {
    CAPTURE(perturb_mode_name(mode));
    PerturbPolicy policy;
    policy.mode = mode;
    policy.punctuation_tags = {"PU"};
    policy.lm_order = 3;
    auto a = build_dataset(corpus, policy, SplitRatios{});
    auto b = build_dataset(corpus, policy, SplitRatios{});
    CHECK(dataset_text(a.train) == dataset_text(b.train));
    CHECK(dataset_text(a.test) == dataset_text(b.test));
    CHECK(a.skip_reasons == b.skip_reasons);
    CHECK(a.skip_reasons.count("too short"));
    policy.seed = 2;
    auto c = build_dataset(corpus, policy, SplitRatios{});
    CHECK(dataset_text(a.train) != dataset_text(c.train));
    for (const Dataset* d : {&a.train, &a.valid, &a.test}) {
      auto counts = count_labels(*d);
      CHECK(counts.positive == counts.negative);
      for (std::size_t i = 0; i < d->size(); i += 2) {
        CHECK((*d)[i + 1].tokens.size() == (*d)[i].tokens.size());
        CHECK((*d)[i + 1].tokens != (*d)[i].tokens);
      }
    }
  }
}

TEST_CASE("mixed mode uses both operations") {
  std::mt19937_64 gen(8);
  const auto corpus = swm::testing::random_tagged_corpus(gen, 200, 10, 16);
  PerturbPolicy policy;
  policy.punctuation_tags = {"PU"};
  auto splits = build_dataset(corpus, policy, SplitRatios{1.0, 0.0, 0.0});
  std::map<SourceOp, int> ops;
  for (const auto& ex : splits.train)
    if (ex.label == 0) ++ops[ex.source];
  CHECK(ops.size() == 2);
  CHECK(ops[SourceOp::kReplace2] > 50);
  CHECK(ops[SourceOp::kSwapSamePos] > 50);
}

TEST_CASE("lm_generate") {
  auto model = NGramModel::train({{"a", "b", "c"}}, 3);
  GenerateOptions opts;
  opts.argmax = true;
  opts.prefix = {"a", "b"};
  opts.max_length = 3;
  std::mt19937_64 rng(1);
  CHECK(generate_sentence(model, opts, rng) == std::vector<std::string>{"a", "b", "c"});
  CHECK(lm_generate(model, opts, 0, rng).empty());

  GenerateOptions sampled;
  sampled.min_length = 2;
  sampled.max_length = 6;
  std::mt19937_64 r1(4), r2(4);
  auto x = lm_generate(model, sampled, 5, r1);
  auto y = lm_generate(model, sampled, 5, r2);
  CHECK(x == y);
  for (const auto& s : x) {
    CHECK(s.size() >= 2);
    CHECK(s.size() <= 6);
    for (const auto& w : s) CHECK(w != "<unk>");
  }
  CHECK_THROWS_AS(lm_generate(NGramModel{}, sampled, 1, r1), std::logic_error);
}
