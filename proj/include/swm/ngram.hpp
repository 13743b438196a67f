#pragma once

// Interpolated Kneser-Ney n-gram model, a length-normalized threshold
// classifier on top of it, and left-to-right sampling.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swm {

class NGramModel {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr double kFallbackDiscount = 0.75;

  using Ngram = std::vector<std::int32_t>;

  /// Highest order keeps raw counts; lower orders count distinct left
  /// extensions. Discounts are n1 / (n1 + 2 n2) per order, 0.75 when that
  /// is undefined or falls outside (0, 1).
  static NGramModel train(const std::vector<std::vector<std::string>>& sentences, std::size_t order = 5);

  std::size_t order() const { return order_; }
  double discount(std::size_t n) const { return discounts_.at(n - 1); }

  /// Token table: 0 = <s>, 1 = </s>, 2 = <unk>, then corpus words sorted.
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::int32_t id(std::string_view token) const;
  /// Ids that can be predicted: everything except <s>.
  std::size_t predictable_size() const { return tokens_.size() - 1; }

  /// Count used at order n (raw at the top order, continuation below).
  std::int64_t count(const Ngram& gram) const;

  /// P(word | history) at the model order; history is left-padded with <s>.
  double prob(std::span<const std::int32_t> history, std::int32_t word) const;
  double prob(const std::vector<std::string>& history, const std::string& word) const;

  /// Distribution over ids 1..tokens().size()-1 (index k holds id k + 1).
  std::vector<double> distribution(std::span<const std::int32_t> history) const;

  /// Mean natural-log probability over the words and the end marker.
  double average_logprob(const std::vector<std::string>& sentence) const;

  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in, const std::string& source = "<ngram>");

  bool operator==(const NGramModel& other) const {
    return order_ == other.order_ && tokens_ == other.tokens_ && discounts_ == other.discounts_ &&
           counts_ == other.counts_;
  }

 private:
  struct ContextStats {
    std::int64_t total = 0;
    std::int64_t distinct = 0;
  };

  void rebuild_stats();
  double prob_at(std::size_t n, std::span<const std::int32_t> context, std::int32_t word) const;

  std::size_t order_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::vector<double> discounts_;
  std::vector<std::map<Ngram, std::int64_t>> counts_;        // [n - 1]
  std::vector<std::map<Ngram, ContextStats>> context_stats_;  // [n - 1], keyed by the n-1 token context
};

/// Rational iff score >= threshold.
struct ThresholdClassifier {
  double threshold = 0.0;
  double validation_accuracy = 0.0;

  int classify(double score) const { return score >= threshold ? 1 : 0; }
};

/// Picks the threshold with the best accuracy among the midpoints of the
/// sorted distinct scores plus one point below and one above all of them.
/// Ties go to the lower threshold. Needs both labels present.
ThresholdClassifier fit_threshold(std::span<const double> scores, std::span<const int> labels);

double threshold_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold);

struct GenerateOptions {
  std::size_t min_length = 1;
  std::size_t max_length = 20;
  bool argmax = false;  // deterministic most-probable token, ties to lowest id
  std::vector<std::string> prefix;
};

/// Samples one sentence left to right. The end marker is masked out until
/// min_length words exist; generation stops at max_length.
std::vector<std::string> generate_sentence(const NGramModel& model, const GenerateOptions& options,
                                           std::mt19937_64& rng);

std::vector<std::vector<std::string>> lm_generate(const NGramModel& model, const GenerateOptions& options,
                                                  std::size_t count, std::mt19937_64& rng);

}  // namespace swm
