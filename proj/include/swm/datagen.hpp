#pragma once

// Negative sampling by perturbing POS-tagged sentences: same-POS word
// replacement, same-POS or unconstrained swaps, and n-gram generation.

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "swm/dataset.hpp"

namespace swm {

struct TaggedToken {
  std::string surface;
  std::string tag;
  bool operator==(const TaggedToken&) const = default;
};

struct TaggedSentence {
  std::vector<TaggedToken> tokens;
  std::size_t provenance = 0;  // 1-based source line
  std::vector<std::string> surfaces() const;
};

struct Corpus {
  std::vector<TaggedSentence> sentences;
  std::size_t skipped_empty = 0;
};

/// One sentence per line, tokens `surface_TAG` separated by spaces. The tag
/// is whatever follows the last underscore.
Corpus parse_corpus(std::istream& in, const std::string& source = "<corpus>");
Corpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const std::vector<TaggedSentence>& sentences);

enum class PerturbMode {
  kReplace1,     // replace one word with a same-POS word
  kReplace2,     // replace two words with same-POS words
  kSwapSamePos,  // swap two words sharing a POS tag
  kSwapRandom,   // swap any two words
  kMixed,        // per sentence, uniformly one of kReplace2 / kSwapSamePos
  kLmGen,        // negatives sampled from an n-gram model
};

/// Accepts replace1|replace2|swap-same-pos|swap-random|mixed|lm-gen and the
/// aliases dataset1..dataset4 for the four single-operation modes.
std::optional<PerturbMode> parse_perturb_mode(std::string_view name);
std::string_view perturb_mode_name(PerturbMode mode);

inline const std::set<std::string>& default_punctuation_tags() {
  static const std::set<std::string> tags = {"PU", "PUNCT", "w", "wp", ".", ",", ":", "``", "''", "-LRB-", "-RRB-"};
  return tags;
}

struct PerturbPolicy {
  PerturbMode mode = PerturbMode::kMixed;
  std::size_t min_length = 8;  // sentences must be strictly longer
  std::set<std::string> punctuation_tags = default_punctuation_tags();
  std::uint64_t seed = 1;
  std::size_t max_draws = 100;  // replacement resampling budget
  std::size_t lm_order = 5;     // kLmGen only
};

/// tag -> sorted distinct surfaces, punctuation excluded.
using PosIndex = std::map<std::string, std::vector<std::string>>;

PosIndex build_pos_index(const std::vector<TaggedSentence>& sentences, const std::set<std::string>& punctuation_tags);

struct PerturbOutcome {
  std::optional<LabeledExample> example;
  std::string skip_reason;
  std::vector<std::size_t> changed;  // positions that differ from the source
};

/// One negative for `sentence` using `op` (a single-operation mode), or a skip
/// with a reason.
PerturbOutcome perturb(const TaggedSentence& sentence, PerturbMode op, const PerturbPolicy& policy,
                       const PosIndex& index, std::mt19937_64& rng);

/// Swaps two given positions (no randomness). Used by perturb and handy on
/// its own.
TaggedSentence swap_positions(const TaggedSentence& sentence, std::size_t i, std::size_t j);

/// Per-sentence RNG stream derived from (seed, provenance).
std::mt19937_64 sentence_rng(std::uint64_t seed, std::size_t provenance);

struct SplitRatios {
  double train = 0.8, valid = 0.1, test = 0.1;
};

struct DatasetSplits {
  Dataset train, valid, test;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> skip_reasons;
};

/// Shuffles sentences by the policy seed, splits them by ratio, then emits
/// each perturbable source as a positive followed by its negative. Sources
/// that cannot be perturbed are dropped with their positive, so every split
/// is exactly balanced. `max_positives` caps each split (train/valid/test);
/// fewer available sources than requested is an error. kLmGen trains a
/// Kneser-Ney model on the training split and samples a same-length sentence
/// per source.
DatasetSplits build_dataset(const std::vector<TaggedSentence>& corpus, const PerturbPolicy& policy,
                            const SplitRatios& ratios,
                            std::optional<std::array<std::size_t, 3>> max_positives = std::nullopt);

}  // namespace swm
