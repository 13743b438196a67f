#include "swm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "swm/text.hpp"

namespace swm {

namespace {

const std::map<std::string, std::string>& slot_tags() {
  static const std::map<std::string, std::string> tags = {
      {"{ADJ}", "JJ"}, {"{NOUN}", "NN"}, {"{VERB}", "VB"}, {"{ADV}", "RB"}, {"{OBJ}", "NN"}};
  return tags;
}

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

std::vector<std::string> all_nouns(const SynthSpec& spec) {
  std::vector<std::string> out;
  for (const auto& [cat, words] : spec.nouns) out.insert(out.end(), words.begin(), words.end());
  for (const auto& p : spec.polysemous) out.push_back(p.word);
  return out;
}

}  // namespace

std::size_t SynthSpec::noun_count() const {
  std::size_t n = polysemous.size();
  for (const auto& [cat, words] : nouns) n += words.size();
  return n;
}

double SynthSpec::polysemous_fraction() const {
  const auto n = noun_count();
  return n ? static_cast<double>(polysemous.size()) / static_cast<double>(n) : 0.0;
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
  std::set<std::string> cats, words;
  auto claim = [&](const std::string& w) {
    if (w.empty() || w.find_first_of(" \t_{}") != std::string::npos) fail("bad word '" + w + "'");
    if (!words.insert(w).second) fail("word '" + w + "' is used twice");
  };
  for (const auto& c : categories) {
    if (!cats.insert(c.name).second) fail("duplicate category " + c.name);
    if (c.features.empty()) fail("category " + c.name + " has no features");
  }
  for (const auto& c : categories) {
    auto it = nouns.find(c.name);
    std::size_t count = it == nouns.end() ? 0 : it->second.size();
    for (const auto& p : polysemous)
      count += std::count(p.categories.begin(), p.categories.end(), c.name) > 0;
    if (count < 2) fail("category " + c.name + " needs at least 2 nouns");
  }
  for (const auto& [cat, list] : nouns) {
    if (!cats.count(cat)) fail("nouns listed under unknown category " + cat);
    for (const auto& w : list) claim(w);
  }
  for (const auto& p : polysemous) {
    claim(p.word);
    if (p.categories.size() < 2) fail("polysemous noun " + p.word + " needs 2+ senses");
    std::set<std::string> distinct(p.categories.begin(), p.categories.end());
    if (distinct.size() != p.categories.size()) fail("polysemous noun " + p.word + " repeats a category");
    for (const auto& c : p.categories)
      if (!cats.count(c)) fail("polysemous noun " + p.word + " uses unknown category " + c);
  }
  if (verbs.empty()) fail("no verbs");
  for (const auto& v : verbs) {
    claim(v.word);
    if (v.allowed.empty()) fail("verb " + v.word + " allows no category");
    for (const auto& c : v.allowed)
      if (!cats.count(c)) fail("verb " + v.word + " allows unknown category " + c);
  }
  for (const auto& w : adjectives) claim(w);
  for (const auto& w : adverbs) claim(w);
  if (templates.empty()) fail("no templates");
  for (const auto& t : templates) {
    const auto toks = text::tokenize(t);
    if (std::count(toks.begin(), toks.end(), "{NOUN}") != 1) fail("template needs exactly one {NOUN}: " + t);
    if (std::count(toks.begin(), toks.end(), "{VERB}") != 1) fail("template needs exactly one {VERB}: " + t);
    for (const auto& tok : toks) {
      if (tok.front() == '{') {
        if (!slot_tags().count(tok)) fail("unknown slot " + tok);
        if (tok == "{ADJ}" && adjectives.empty()) fail("template uses {ADJ} without adjectives");
        if (tok == "{ADV}" && adverbs.empty()) fail("template uses {ADV} without adverbs");
      } else if (tok.rfind('_') == std::string::npos) {
        fail("literal '" + tok + "' needs a _TAG");
      }
    }
  }
  if (!(held_out_fraction >= 0 && held_out_fraction < 1)) fail("held_out_fraction must lie in [0, 1)");
  if (train_positives == 0 || valid_positives == 0 || test_positives == 0) fail("split sizes must be positive");
  // Every verb needs a compatible and an incompatible noun.
  for (const auto& v : verbs) {
    bool yes = false, no = false;
    for (const auto& n : all_nouns(*this)) (synth_label(*this, n, v.word) ? yes : no) = true;
    if (!yes || !no) fail("verb " + v.word + " needs both compatible and incompatible nouns");
  }
}

SynthSpec default_synth_spec(std::uint64_t seed) {
  SynthSpec s;
  s.categories = {{"ANIMATE", {"living", "mobile"}},
                  {"PLANT", {"living", "rooted"}},
                  {"VEHICLE", {"artifact", "mobile"}},
                  {"BUILDING", {"artifact", "rooted"}}};
  s.nouns = {{"ANIMATE", {"cat", "dog", "horse", "fox", "sheep", "rabbit"}},
             {"PLANT", {"fern", "oak", "rose", "tulip", "moss", "ivy"}},
             {"VEHICLE", {"car", "truck", "bus", "tram", "bike", "van"}},
             {"BUILDING", {"house", "tower", "barn", "church", "school", "hall"}}};
  // Opposite corners share no feature, so both pairings average to the same
  // sememe mix and only sense selection tells them apart.
  const std::vector<std::string> names = {"blick", "dax",  "fep",  "gorp", "kiki", "lorp", "mib",  "nork",
                                          "pilk",  "quib", "rulm", "sorn", "tove", "vump", "wug",  "yeb"};
  for (std::size_t i = 0; i < names.size(); ++i)
    s.polysemous.push_back(
        {names[i], i % 2 == 0 ? std::vector<std::string>{"ANIMATE", "BUILDING"} : std::vector<std::string>{"PLANT", "VEHICLE"}});
  s.verbs = {{"sleeps", {"ANIMATE"}},          {"wilts", {"PLANT"}},
             {"stalls", {"VEHICLE"}},          {"collapses", {"BUILDING"}},
             {"grows", {"ANIMATE", "PLANT"}},  {"moves", {"ANIMATE", "VEHICLE"}},
             {"stands", {"PLANT", "BUILDING"}}, {"breaks", {"VEHICLE", "BUILDING"}}};
  s.adjectives = {"big", "small", "old", "young", "red", "quiet"};
  s.adverbs = {"slowly", "quickly", "today", "again", "often"};
  s.templates = {"the_DT {ADJ} {NOUN} {VERB} ._PU", "the_DT {NOUN} {VERB} {ADV} ._PU",
                 "the_DT {ADJ} {NOUN} {VERB} {ADV} near_IN the_DT {OBJ} ._PU",
                 "the_DT {NOUN} {VERB} {ADV} near_IN the_DT {ADJ} {OBJ} ._PU"};
  s.seed = seed;
  return s;
}

std::vector<std::string> noun_categories(const SynthSpec& spec, const std::string& noun) {
  for (const auto& [cat, words] : spec.nouns)
    if (std::find(words.begin(), words.end(), noun) != words.end()) return {cat};
  for (const auto& p : spec.polysemous)
    if (p.word == noun) return p.categories;
  return {};
}

int synth_label(const SynthSpec& spec, const std::string& noun, const std::string& verb) {
  auto v = std::find_if(spec.verbs.begin(), spec.verbs.end(), [&](const SynthVerb& x) { return x.word == verb; });
  if (v == spec.verbs.end()) throw std::invalid_argument("unknown verb '" + verb + "'");
  const auto cats = noun_categories(spec, noun);
  if (cats.empty()) throw std::invalid_argument("unknown noun '" + noun + "'");
  for (const auto& c : cats)
    if (std::find(v->allowed.begin(), v->allowed.end(), c) != v->allowed.end()) return 1;
  return 0;
}

SynthData gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  SynthData out;
  std::map<std::string, const SynthCategory*> by_name;
  for (const auto& c : spec.categories) by_name[c.name] = &c;
  for (const auto& [cat, words] : spec.nouns)
    for (const auto& w : words) out.lexicon.add(w, {by_name.at(cat)->features});
  for (const auto& p : spec.polysemous) {
    std::vector<std::vector<std::string>> senses;
    for (const auto& c : p.categories) senses.push_back(by_name.at(c)->features);
    out.lexicon.add(p.word, senses);
  }
  for (const auto& v : spec.verbs) out.lexicon.add(v.word, {{v.word}});
  for (const auto& w : spec.adjectives) out.lexicon.add(w, {{w}});
  for (const auto& w : spec.adverbs) out.lexicon.add(w, {{w}});

  // Hold out a share of each noun group, keeping one of each in training.
  std::map<std::string, std::vector<std::string>> groups = spec.nouns;
  for (const auto& p : spec.polysemous) {
    auto key = p.categories;
    std::sort(key.begin(), key.end());
    groups["poly:" + text::join(key, "+")].push_back(p.word);
  }
  for (auto& [name, words] : groups) {
    std::shuffle(words.begin(), words.end(), rng);
    const auto k = std::min(words.size() - 1,
                            static_cast<std::size_t>(std::llround(spec.held_out_fraction * static_cast<double>(words.size()))));
    out.held_out.insert(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(k));
  }

  const auto nouns = all_nouns(spec);
  std::vector<std::string> seen;
  for (const auto& n : nouns)
    if (!out.held_out.count(n)) seen.push_back(n);

  auto fill = [&](const std::string& tmpl, const std::string& noun, const std::string& verb,
                  const std::vector<std::string>& choices, std::size_t provenance) {
    TaggedSentence s;
    s.provenance = provenance;
    std::size_t k = 0;
    for (const auto& tok : text::tokenize(tmpl)) {
      if (tok == "{NOUN}") {
        s.tokens.push_back({noun, "NN"});
      } else if (tok == "{VERB}") {
        s.tokens.push_back({verb, "VB"});
      } else if (tok.front() == '{') {
        s.tokens.push_back({choices[k++], slot_tags().at(tok)});
      } else {
        const auto us = tok.rfind('_');
        s.tokens.push_back({tok.substr(0, us), tok.substr(us + 1)});
      }
    }
    return s;
  };

  std::size_t provenance = 0;
  auto make_split = [&](Dataset& data, std::size_t positives, const std::vector<std::string>& pool) {
    for (std::size_t i = 0; i < positives; ++i) {
      ++provenance;
      const auto& tmpl = pick(spec.templates, rng);
      std::vector<std::string> compatible, incompatible;
      const SynthVerb* verb = nullptr;
      while (compatible.empty() || incompatible.empty()) {
        verb = &pick(spec.verbs, rng);
        compatible.clear();
        incompatible.clear();
        for (const auto& n : pool) (synth_label(spec, n, verb->word) ? compatible : incompatible).push_back(n);
      }
      const auto& noun = pick(compatible, rng);
      const auto& wrong = pick(incompatible, rng);
      std::vector<std::string> choices;
      for (const auto& tok : text::tokenize(tmpl)) {
        if (tok == "{ADJ}") choices.push_back(pick(spec.adjectives, rng));
        if (tok == "{ADV}") choices.push_back(pick(spec.adverbs, rng));
        if (tok == "{OBJ}") choices.push_back(pick(pool, rng));
      }
      auto pos = fill(tmpl, noun, verb->word, choices, provenance);
      auto neg = fill(tmpl, wrong, verb->word, choices, provenance);
      data.push_back({pos.surfaces(), 1, SourceOp::kNone, provenance});
      data.push_back({neg.surfaces(), 0, SourceOp::kReplace1, provenance});
      out.corpus.push_back(std::move(pos));
    }
  };
  make_split(out.train, spec.train_positives, seen);
  make_split(out.valid, spec.valid_positives, nouns);
  make_split(out.test, spec.test_positives, nouns);
  return out;
}

void write_synthetic(const SynthData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("lexicon.tsv");
    data.lexicon.save(f);
  }
  {
    auto f = open("corpus.txt");
    write_corpus(f, data.corpus);
  }
  save_dataset((fs::path(dir) / "train.tsv").string(), data.train);
  save_dataset((fs::path(dir) / "valid.tsv").string(), data.valid);
  save_dataset((fs::path(dir) / "test.tsv").string(), data.test);
  auto f = open("summary.tsv");
  write_summary(f, {{"train", count_labels(data.train)},
                    {"valid", count_labels(data.valid)},
                    {"test", count_labels(data.test)}});
}

}  // namespace swm
