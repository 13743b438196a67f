#include "swm/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "swm/text.hpp"

namespace swm {

Vocabulary::Vocabulary(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 2)) {
  intern(kPadToken);
  intern(kUnkToken);
}

TokenId Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

TokenId Vocabulary::intern(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  if (tokens_.size() >= capacity_) return kUnk;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, std::size_t capacity) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
    throw std::invalid_argument("vocabulary must start with <pad>, <unk>");
  Vocabulary v(std::max(capacity, tokens.size()));
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.intern(tokens[i]);
  }
  return v;
}

Vocabulary Vocabulary::load(std::istream& in, std::size_t capacity, const std::string& source) {
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(source, lineno, "empty vocabulary token");
    tokens.push_back(line);
  }
  try {
    return from_tokens(tokens, capacity);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, lineno, e.what());
  }
}

Vocabulary build_vocab(const std::map<std::string, std::size_t>& counts, std::size_t capacity) {
  if (capacity < 3) throw std::invalid_argument("vocabulary capacity must be >= 3");
  Vocabulary v(capacity);
  if (counts.empty()) {
    std::clog << "warning: empty corpus, vocabulary holds only <pad>/<unk>\n";
    return v;
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is a std::map, so a stable sort on count keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : ranked) {
    if (v.full()) break;
    if (tok == Vocabulary::kPadToken || tok == Vocabulary::kUnkToken) continue;
    v.intern(tok);
  }
  return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t capacity) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++counts[tok];
  return build_vocab(counts, capacity);
}

SememeLexicon::SememeLexicon(Vocabulary sememe_vocab) : sememe_vocab_(std::move(sememe_vocab)) {}

void SememeLexicon::add(const std::string& word, const std::vector<std::vector<std::string>>& senses) {
  if (word.empty()) throw std::invalid_argument("empty word");
  if (senses.empty()) throw std::invalid_argument("word '" + word + "' has no senses");
  auto& entry = entries_[word];
  entry.word = word;
  for (const auto& sememes : senses) {
    Sense s;
    for (const auto& name : sememes) {
      if (name.empty()) throw std::invalid_argument("word '" + word + "' has an empty sememe");
      const TokenId id = sememe_vocab_.intern(name);
      if (std::find(s.sememes.begin(), s.sememes.end(), id) == s.sememes.end()) s.sememes.push_back(id);
    }
    if (s.sememes.empty()) throw std::invalid_argument("word '" + word + "' has an empty sense");
    entry.senses.push_back(std::move(s));
  }
}

const LexiconEntry* SememeLexicon::find(const std::string& word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Sense> SememeLexicon::senses_of(const std::string& word) {
  if (const auto* e = find(word)) return e->senses;
  return {Sense{{sememe_vocab_.intern(word)}}};
}

std::vector<Sense> SememeLexicon::lookup(const std::string& word) const {
  if (const auto* e = find(word)) return e->senses;
  return {Sense{{sememe_vocab_.index_of(word)}}};
}

void SememeLexicon::validate() const {
  const auto n = static_cast<TokenId>(sememe_vocab_.size());
  for (const auto& [word, entry] : entries_) {
    if (entry.senses.empty()) throw std::invalid_argument("word '" + word + "' has no senses");
    for (const auto& s : entry.senses) {
      if (s.sememes.empty()) throw std::invalid_argument("word '" + word + "' has an empty sense");
      for (TokenId id : s.sememes)
        if (id < 0 || id >= n)
          throw std::invalid_argument("word '" + word + "' references sememe id " + std::to_string(id));
    }
  }
}

void SememeLexicon::save(std::ostream& out) const {
  for (const auto& [word, entry] : entries_) {
    out << word << '\t';
    for (std::size_t j = 0; j < entry.senses.size(); ++j) {
      if (j) out << " | ";
      const auto& sememes = entry.senses[j].sememes;
      for (std::size_t k = 0; k < sememes.size(); ++k) out << (k ? "," : "") << sememe_vocab_.token(sememes[k]);
    }
    out << '\n';
  }
}

SememeLexicon parse_lexicon(std::istream& in, Vocabulary sememe_vocab, const std::string& source) {
  SememeLexicon lex(std::move(sememe_vocab));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "expected word<TAB>senses");
    const std::string word(text::trim(std::string_view(line).substr(0, tab)));
    const std::string_view rest = text::trim(std::string_view(line).substr(tab + 1));
    if (word.empty()) throw ParseError(source, lineno, "empty word");
    if (rest.empty()) throw ParseError(source, lineno, "word '" + word + "' has no senses");
    std::vector<std::vector<std::string>> senses;
    for (auto sense : text::split(rest, '|')) {
      std::vector<std::string> sememes;
      for (auto sememe : text::split(text::trim(sense), ',')) {
        auto s = text::trim(sememe);
        if (s.empty()) throw ParseError(source, lineno, "empty sememe in '" + std::string(sense) + "'");
        sememes.emplace_back(s);
      }
      senses.push_back(std::move(sememes));
    }
    try {
      lex.add(word, senses);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return lex;
}

SememeLexicon load_lexicon(const std::string& path, Vocabulary sememe_vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon '" + path + "'");
  return parse_lexicon(in, std::move(sememe_vocab), path);
}

}  // namespace swm
