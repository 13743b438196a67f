#pragma once

// Shared helpers for the test binaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "swm/autodiff.hpp"
#include "swm/datagen.hpp"
#include "swm/synthetic.hpp"

namespace swm::testing {

/// Central-difference gradient of `f` with respect to every entry of `x`.
inline ad::Matrix numeric_gradient(const std::function<double()>& f, ad::Matrix& x, double h = 1e-5) {
  ad::Matrix g(x.rows(), x.cols());
  for (ad::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_rel_error(const ad::Matrix& a, const ad::Matrix& b, double floor = 1e-6) {
  double worst = 0;
  for (ad::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    worst = std::max(worst, d / std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), floor}));
  }
  return worst;
}

inline void fill_uniform(ad::Array& a, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (ad::Index i = 0; i < a.size(); ++i) a.values().data()[i] = u(rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("swm-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random tagged sentences over a small tag inventory including punctuation
/// (tag PU). Provenance runs 1..n.
inline std::vector<TaggedSentence> random_tagged_corpus(std::mt19937_64& rng, std::size_t n, std::size_t min_len = 5,
                                                        std::size_t max_len = 16) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> pools = {
      {"NN", {"cat", "dog", "tree", "house", "river", "car", "bird"}},
      {"VB", {"sees", "eats", "likes", "finds"}},
      {"JJ", {"red", "big", "old"}},
      {"DT", {"the", "a"}},
      {"RB", {"slowly"}},
      {"PU", {",", "."}}};
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), pool(0, pools.size() - 1);
  std::vector<TaggedSentence> out;
  for (std::size_t k = 0; k < n; ++k) {
    TaggedSentence s;
    s.provenance = k + 1;
    for (std::size_t i = len(rng); i > 0; --i) {
      const auto& [tag, words] = pools[pool(rng)];
      s.tokens.push_back({words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)], tag});
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Independent check of one perturbation against the rules for `op`. Returns
/// an empty string when every rule holds, otherwise the first violation.
inline std::string perturbation_violation(const TaggedSentence& src, const PerturbOutcome& outcome, PerturbMode op,
                                          const PerturbPolicy& policy, const PosIndex& index) {
  if (!outcome.example) return "no example";
  const auto& ex = *outcome.example;
  if (ex.label != 0) return "negative not labeled 0";
  if (ex.tokens.size() != src.tokens.size()) return "length changed";
  std::vector<std::size_t> diff;
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    const bool punct = policy.punctuation_tags.count(src.tokens[i].tag) > 0;
    if (ex.tokens[i] != src.tokens[i].surface) {
      if (punct) return "punctuation changed at " + std::to_string(i);
      diff.push_back(i);
    }
  }
  if (diff != outcome.changed) return "reported positions differ";
  const std::size_t want = op == PerturbMode::kReplace1 ? 1 : 2;
  if (diff.size() != want) return "changed " + std::to_string(diff.size()) + " positions";
  if (op == PerturbMode::kReplace1 || op == PerturbMode::kReplace2) {
    for (auto i : diff) {
      auto it = index.find(src.tokens[i].tag);
      if (it == index.end() || !std::binary_search(it->second.begin(), it->second.end(), ex.tokens[i]))
        return "replacement outside the tag's candidates";
    }
  } else {
    const auto i = diff[0], j = diff[1];
    if (ex.tokens[i] != src.tokens[j].surface || ex.tokens[j] != src.tokens[i].surface) return "not a swap";
    if (op == PerturbMode::kSwapSamePos && src.tokens[i].tag != src.tokens[j].tag) return "swap across tags";
  }
  return {};
}

/// Label by brute force from the spec tables: the subject is the noun before
/// the verb; the sentence is rational iff one of its categories is allowed.
/// Returns -1 when the sentence has no recognizable verb or subject.
inline int rule_label(const SynthSpec& spec, const std::vector<std::string>& tokens) {
  for (std::size_t v = 0; v < tokens.size(); ++v)
    for (const auto& verb : spec.verbs) {
      if (verb.word != tokens[v]) continue;
      for (std::size_t n = 0; n < v; ++n) {
        std::vector<std::string> cats;
        for (const auto& [cat, words] : spec.nouns)
          for (const auto& w : words)
            if (w == tokens[n]) cats.push_back(cat);
        for (const auto& p : spec.polysemous)
          if (p.word == tokens[n]) cats = p.categories;
        if (cats.empty()) continue;
        for (const auto& c : cats)
          for (const auto& a : verb.allowed)
            if (a == c) return 1;
        return 0;
      }
      return -1;
    }
  return -1;
}

}  // namespace swm::testing
