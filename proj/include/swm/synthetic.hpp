#pragma once

// A toy language with sememe-governed selectional restrictions. Categories
// are conjunctions of feature sememes; a verb accepts subjects of some
// categories; a sentence is rational iff some sense of its subject noun
// belongs to a category the verb accepts.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "swm/datagen.hpp"
#include "swm/dataset.hpp"
#include "swm/lexicon.hpp"

namespace swm {

struct SynthCategory {
  std::string name;
  std::vector<std::string> features;  // sememes of a sense in this category
};

struct SynthVerb {
  std::string word;
  std::vector<std::string> allowed;  // category names
};

struct PolysemousNoun {
  std::string word;
  std::vector<std::string> categories;  // one sense per category
};

struct SynthSpec {
  std::vector<SynthCategory> categories;
  std::map<std::string, std::vector<std::string>> nouns;  // category -> monosemous nouns
  std::vector<PolysemousNoun> polysemous;
  std::vector<SynthVerb> verbs;
  std::vector<std::string> adjectives;
  std::vector<std::string> adverbs;
  /// Templates of `surface_TAG` tokens with slots {ADJ} {NOUN} {VERB} {ADV}
  /// {OBJ}. {NOUN} is the subject and must appear exactly once.
  std::vector<std::string> templates;
  double held_out_fraction = 0.25;  // nouns that never occur in training
  std::size_t train_positives = 1200;
  std::size_t valid_positives = 150;
  std::size_t test_positives = 150;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;

  std::size_t noun_count() const;
  double polysemous_fraction() const;
};

/// Four categories from two binary features, 6 monosemous nouns each,
/// 16 two-sense nouns pairing opposite categories, and eight verbs.
SynthSpec default_synth_spec(std::uint64_t seed = 1);

/// Category names of every sense of `noun` (empty for non-nouns).
std::vector<std::string> noun_categories(const SynthSpec& spec, const std::string& noun);

/// Rule label for a (subject noun, verb) pair.
int synth_label(const SynthSpec& spec, const std::string& noun, const std::string& verb);

struct SynthData {
  SememeLexicon lexicon;
  std::vector<TaggedSentence> corpus;  // every positive, tagged
  Dataset train, valid, test;
  std::set<std::string> held_out;  // nouns absent from training
};

/// Positives fill a random template with a compatible (noun, verb) pair; the
/// paired negative swaps the subject for an incompatible noun. Training
/// uses only nouns outside the held-out set.
SynthData gen_synthetic(const SynthSpec& spec);

/// Writes lexicon.tsv, corpus.txt, train.tsv, valid.tsv, test.tsv and
/// summary.tsv into `dir` (created if missing).
void write_synthetic(const SynthData& data, const std::string& dir);

}  // namespace swm
