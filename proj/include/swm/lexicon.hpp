#pragma once

// HowNet-shaped sememe lexicon: word -> senses -> sememes, plus the token
// vocabularies shared by the model.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swm {

using TokenId = std::int64_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Token <-> index map with PAD = 0 and UNK = 1 reserved.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  explicit Vocabulary(std::size_t capacity = 50000);

  /// Index of `token`, or kUnk.
  TokenId index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  /// Adds `token` if absent and capacity allows; returns its index or kUnk.
  TokenId intern(std::string_view token);

  std::size_t size() const { return tokens_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return tokens_.size() >= capacity_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// No further interning; capacity shrinks to the current size.
  void freeze() { capacity_ = tokens_.size(); }

  void save(std::ostream& out) const;
  /// One token per line, line number = index. Lines 0/1 must be PAD/UNK.
  static Vocabulary load(std::istream& in, std::size_t capacity = 0, const std::string& source = "<vocab>");
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t capacity = 0);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t capacity_;
};

/// Most frequent tokens first, ties lexicographic, truncated to capacity.
/// An empty corpus yields a PAD/UNK-only vocabulary and logs a warning.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t capacity);
Vocabulary build_vocab(const std::map<std::string, std::size_t>& counts, std::size_t capacity);

struct Sense {
  std::vector<TokenId> sememes;
  bool operator==(const Sense&) const = default;
};

struct LexiconEntry {
  std::string word;
  std::vector<Sense> senses;
  bool operator==(const LexiconEntry&) const = default;
};

class SememeLexicon {
 public:
  explicit SememeLexicon(Vocabulary sememe_vocab = Vocabulary(20000));

  /// Adds senses given as sememe strings. Duplicate words append their senses;
  /// duplicate sememes inside a sense are dropped.
  void add(const std::string& word, const std::vector<std::vector<std::string>>& senses);

  /// Senses of `word`. Unknown words get one sense whose sememe is the word
  /// itself, interned on demand (UNK once the sememe vocabulary is full).
  std::vector<Sense> senses_of(const std::string& word);
  /// Like senses_of but never interns.
  std::vector<Sense> lookup(const std::string& word) const;

  const LexiconEntry* find(const std::string& word) const;
  const std::map<std::string, LexiconEntry>& entries() const { return entries_; }
  const Vocabulary& sememe_vocab() const { return sememe_vocab_; }
  Vocabulary& sememe_vocab() { return sememe_vocab_; }

  /// Throws if any sense is empty or references an invalid sememe id.
  void validate() const;

  void save(std::ostream& out) const;

  bool operator==(const SememeLexicon& other) const {
    return entries_ == other.entries_ && sememe_vocab_ == other.sememe_vocab_;
  }

 private:
  std::map<std::string, LexiconEntry> entries_;
  Vocabulary sememe_vocab_;
};

/// Parses `word<TAB>sense | sense ...`, each sense a comma-separated sememe
/// list. Sememes are interned into `sememe_vocab` in file order.
SememeLexicon parse_lexicon(std::istream& in, Vocabulary sememe_vocab = Vocabulary(20000),
                            const std::string& source = "<lexicon>");
SememeLexicon load_lexicon(const std::string& path, Vocabulary sememe_vocab = Vocabulary(20000));

}  // namespace swm
