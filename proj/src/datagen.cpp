#include "swm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "swm/lexicon.hpp"
#include "swm/ngram.hpp"
#include "swm/text.hpp"

namespace swm {

std::vector<std::string> TaggedSentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

Corpus parse_corpus(std::istream& in, const std::string& source) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      ++corpus.skipped_empty;
      continue;
    }
    TaggedSentence s;
    s.provenance = lineno;
    for (const auto& tok : text::tokenize(line)) {
      const auto us = tok.rfind('_');
      if (us == std::string::npos || us == 0 || us + 1 == tok.size())
        throw ParseError(source, lineno, "token '" + tok + "' is not of the form surface_TAG");
      s.tokens.push_back({tok.substr(0, us), tok.substr(us + 1)});
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(std::ostream& out, const std::vector<TaggedSentence>& sentences) {
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << (i ? " " : "") << s.tokens[i].surface << '_' << s.tokens[i].tag;
    out << '\n';
  }
}

std::optional<PerturbMode> parse_perturb_mode(std::string_view name) {
  if (name == "replace1" || name == "dataset1") return PerturbMode::kReplace1;
  if (name == "replace2" || name == "dataset2") return PerturbMode::kReplace2;
  if (name == "swap-same-pos" || name == "dataset3") return PerturbMode::kSwapSamePos;
  if (name == "swap-random" || name == "dataset4") return PerturbMode::kSwapRandom;
  if (name == "mixed") return PerturbMode::kMixed;
  if (name == "lm-gen") return PerturbMode::kLmGen;
  return std::nullopt;
}

std::string_view perturb_mode_name(PerturbMode mode) {
  switch (mode) {
    case PerturbMode::kReplace1: return "replace1";
    case PerturbMode::kReplace2: return "replace2";
    case PerturbMode::kSwapSamePos: return "swap-same-pos";
    case PerturbMode::kSwapRandom: return "swap-random";
    case PerturbMode::kMixed: return "mixed";
    case PerturbMode::kLmGen: return "lm-gen";
  }
  return "?";
}

PosIndex build_pos_index(const std::vector<TaggedSentence>& sentences, const std::set<std::string>& punctuation_tags) {
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens)
      if (!punctuation_tags.count(t.tag)) sets[t.tag].insert(t.surface);
  PosIndex index;
  for (auto& [tag, surfaces] : sets) index[tag].assign(surfaces.begin(), surfaces.end());
  return index;
}

TaggedSentence swap_positions(const TaggedSentence& sentence, std::size_t i, std::size_t j) {
  if (i >= sentence.tokens.size() || j >= sentence.tokens.size()) throw std::out_of_range("swap_positions: index");
  TaggedSentence out = sentence;
  std::swap(out.tokens[i], out.tokens[j]);
  return out;
}

std::mt19937_64 sentence_rng(std::uint64_t seed, std::size_t provenance) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(provenance), static_cast<std::uint32_t>(provenance >> 32)};
  return std::mt19937_64(seq);
}

namespace {

SourceOp source_of(PerturbMode op) {
  switch (op) {
    case PerturbMode::kReplace1: return SourceOp::kReplace1;
    case PerturbMode::kReplace2: return SourceOp::kReplace2;
    case PerturbMode::kSwapSamePos: return SourceOp::kSwapSamePos;
    case PerturbMode::kSwapRandom: return SourceOp::kSwapRandom;
    case PerturbMode::kLmGen: return SourceOp::kLmGen;
    case PerturbMode::kMixed: break;
  }
  throw std::invalid_argument("perturb: mixed is not a single operation");
}

std::size_t uniform_index(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

PerturbOutcome skip(std::string reason) {
  PerturbOutcome out;
  out.skip_reason = std::move(reason);
  return out;
}

PerturbOutcome finish(const TaggedSentence& source, const TaggedSentence& result, PerturbMode op) {
  PerturbOutcome out;
  LabeledExample ex;
  ex.tokens = result.surfaces();
  ex.label = 0;
  ex.source = source_of(op);
  ex.provenance = source.provenance;
  for (std::size_t i = 0; i < source.tokens.size(); ++i)
    if (source.tokens[i].surface != result.tokens[i].surface) out.changed.push_back(i);
  out.example = std::move(ex);
  return out;
}

PerturbOutcome replace(const TaggedSentence& sentence, std::size_t how_many, PerturbMode op,
                       const PerturbPolicy& policy, const PosIndex& index, std::mt19937_64& rng) {
  // Positions whose tag offers at least one other surface.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const auto& t = sentence.tokens[i];
    if (policy.punctuation_tags.count(t.tag)) continue;
    auto it = index.find(t.tag);
    if (it == index.end()) continue;
    const auto& c = it->second;
    if (c.size() > 1 || (c.size() == 1 && c[0] != t.surface)) eligible.push_back(i);
  }
  if (eligible.size() < how_many) return skip("no replaceable position");
  std::shuffle(eligible.begin(), eligible.end(), rng);
  TaggedSentence out = sentence;
  for (std::size_t k = 0; k < how_many; ++k) {
    auto& tok = out.tokens[eligible[k]];
    const auto& candidates = index.at(tok.tag);
    bool done = false;
    for (std::size_t draw = 0; draw < policy.max_draws && !done; ++draw) {
      const auto& pick = candidates[uniform_index(candidates.size(), rng)];
      if (pick != tok.surface) {
        tok.surface = pick;
        done = true;
      }
    }
    if (!done) return skip("replacement draws exhausted");
  }
  return finish(sentence, out, op);
}

PerturbOutcome swap(const TaggedSentence& sentence, bool same_pos, PerturbMode op, const PerturbPolicy& policy,
                    std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto& toks = sentence.tokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (policy.punctuation_tags.count(toks[i].tag)) continue;
    for (std::size_t j = i + 1; j < toks.size(); ++j) {
      if (policy.punctuation_tags.count(toks[j].tag)) continue;
      if (same_pos && toks[i].tag != toks[j].tag) continue;
      if (toks[i].surface == toks[j].surface) continue;
      pairs.emplace_back(i, j);
    }
  }
  if (pairs.empty()) return skip(same_pos ? "no same-POS pair" : "no swappable pair");
  const auto [i, j] = pairs[uniform_index(pairs.size(), rng)];
  return finish(sentence, swap_positions(sentence, i, j), op);
}

}  // namespace

PerturbOutcome perturb(const TaggedSentence& sentence, PerturbMode op, const PerturbPolicy& policy,
                       const PosIndex& index, std::mt19937_64& rng) {
  if (sentence.tokens.size() <= policy.min_length) return skip("too short");
  switch (op) {
    case PerturbMode::kReplace1: return replace(sentence, 1, op, policy, index, rng);
    case PerturbMode::kReplace2: return replace(sentence, 2, op, policy, index, rng);
    case PerturbMode::kSwapSamePos: return swap(sentence, true, op, policy, rng);
    case PerturbMode::kSwapRandom: return swap(sentence, false, op, policy, rng);
    case PerturbMode::kMixed:
    case PerturbMode::kLmGen: break;
  }
  throw std::invalid_argument("perturb: '" + std::string(perturb_mode_name(op)) + "' is not a single operation");
}

DatasetSplits build_dataset(const std::vector<TaggedSentence>& corpus, const PerturbPolicy& policy,
                            const SplitRatios& ratios, std::optional<std::array<std::size_t, 3>> max_positives) {
  if (policy.min_length < 1) throw std::invalid_argument("min_length must be >= 1");
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  if (corpus.empty()) throw std::invalid_argument("corpus is empty");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(policy.seed);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const auto n = static_cast<double>(corpus.size());
  const auto n_train = std::min(corpus.size(), static_cast<std::size_t>(std::llround(n * ratios.train)));
  const auto n_valid = std::min(corpus.size() - n_train, static_cast<std::size_t>(std::llround(n * ratios.valid)));
  const std::array<std::pair<std::size_t, std::size_t>, 3> ranges = {
      std::pair{std::size_t{0}, n_train}, std::pair{n_train, n_train + n_valid},
      std::pair{n_train + n_valid, corpus.size()}};

  std::vector<TaggedSentence> train_sources;
  for (std::size_t k = 0; k < n_train; ++k) train_sources.push_back(corpus[order[k]]);
  const PosIndex index = build_pos_index(train_sources, policy.punctuation_tags);

  std::optional<NGramModel> lm;
  if (policy.mode == PerturbMode::kLmGen) {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& s : train_sources) sentences.push_back(s.surfaces());
    if (sentences.empty()) throw std::invalid_argument("lm-gen needs a nonempty training split");
    lm = NGramModel::train(sentences, policy.lm_order);
  }

  DatasetSplits out;
  std::array<Dataset*, 3> targets = {&out.train, &out.valid, &out.test};
  for (std::size_t split = 0; split < 3; ++split) {
    std::size_t positives = 0;
    const std::size_t cap = max_positives ? (*max_positives)[split] : SIZE_MAX;
    for (std::size_t k = ranges[split].first; k < ranges[split].second && positives < cap; ++k) {
      const auto& sentence = corpus[order[k]];
      auto rng = sentence_rng(policy.seed, sentence.provenance);
      PerturbOutcome outcome;
      if (policy.mode == PerturbMode::kLmGen) {
        if (sentence.tokens.size() <= policy.min_length) {
          outcome = skip("too short");
        } else {
          GenerateOptions opts;
          opts.min_length = opts.max_length = sentence.tokens.size();
          const auto source = sentence.surfaces();
          outcome = skip("generated sentence equals source");
          for (std::size_t attempt = 0; attempt < policy.max_draws; ++attempt) {
            auto generated = generate_sentence(*lm, opts, rng);
            if (generated != source) {
              LabeledExample ex{std::move(generated), 0, SourceOp::kLmGen, sentence.provenance};
              outcome = PerturbOutcome{std::move(ex), {}, {}};
              break;
            }
          }
        }
      } else {
        PerturbMode op = policy.mode;
        if (op == PerturbMode::kMixed)
          op = std::bernoulli_distribution(0.5)(rng) ? PerturbMode::kSwapSamePos : PerturbMode::kReplace2;
        outcome = perturb(sentence, op, policy, index, rng);
      }
      if (!outcome.example) {
        ++out.skipped;
        ++out.skip_reasons[outcome.skip_reason];
        continue;
      }
      targets[split]->push_back({sentence.surfaces(), 1, SourceOp::kNone, sentence.provenance});
      targets[split]->push_back(std::move(*outcome.example));
      ++positives;
    }
    if (max_positives && positives < cap)
      throw std::invalid_argument("corpus too small: split " + std::to_string(split) + " has " +
                                  std::to_string(positives) + " perturbable sentences, " + std::to_string(cap) +
                                  " requested");
  }
  return out;
}

}  // namespace swm
