#include "swm/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "swm/lexicon.hpp"
#include "swm/text.hpp"

namespace swm {

namespace {

constexpr std::int32_t kBosId = 0;
constexpr std::int32_t kEosId = 1;
constexpr std::int32_t kUnkId = 2;

std::vector<std::int32_t> padded_ids(const NGramModel& m, const std::vector<std::string>& sentence) {
  std::vector<std::int32_t> ids(m.order() - 1, kBosId);
  for (const auto& w : sentence) ids.push_back(m.id(w));
  ids.push_back(kEosId);
  return ids;
}

}  // namespace

std::int32_t NGramModel::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

NGramModel NGramModel::train(const std::vector<std::vector<std::string>>& sentences, std::size_t order) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (sentences.empty()) throw std::invalid_argument("n-gram training corpus is empty");
  NGramModel m;
  m.order_ = order;
  std::set<std::string> words;
  for (const auto& s : sentences)
    for (const auto& w : s)
      if (w != kBos && w != kEos && w != kUnk) words.insert(w);
  m.tokens_ = {std::string(kBos), std::string(kEos), std::string(kUnk)};
  m.tokens_.insert(m.tokens_.end(), words.begin(), words.end());
  for (std::size_t i = 0; i < m.tokens_.size(); ++i) m.ids_[m.tokens_[i]] = static_cast<std::int32_t>(i);

  // Distinct k-gram types ending at predicted positions, for every k.
  std::vector<std::set<Ngram>> types(order + 1);
  m.counts_.assign(order, {});
  for (const auto& s : sentences) {
    const auto ids = padded_ids(m, s);
    for (std::size_t i = order - 1; i < ids.size(); ++i) {
      Ngram full(ids.begin() + static_cast<std::ptrdiff_t>(i + 1 - order), ids.begin() + static_cast<std::ptrdiff_t>(i + 1));
      ++m.counts_[order - 1][full];
      for (std::size_t k = 2; k <= order; ++k) types[k].insert(Ngram(full.end() - static_cast<std::ptrdiff_t>(k), full.end()));
    }
  }
  for (std::size_t n = 1; n < order; ++n)
    for (const auto& ext : types[n + 1]) ++m.counts_[n - 1][Ngram(ext.begin() + 1, ext.end())];

  m.discounts_.assign(order, kFallbackDiscount);
  for (std::size_t n = 1; n <= order; ++n) {
    std::int64_t n1 = 0, n2 = 0;
    for (const auto& [g, c] : m.counts_[n - 1]) {
      n1 += c == 1;
      n2 += c == 2;
    }
    if (n1 > 0 && n2 > 0) m.discounts_[n - 1] = static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
  }
  m.rebuild_stats();
  return m;
}

void NGramModel::rebuild_stats() {
  context_stats_.assign(order_, {});
  for (std::size_t n = 1; n <= order_; ++n)
    for (const auto& [g, c] : counts_[n - 1]) {
      auto& st = context_stats_[n - 1][Ngram(g.begin(), g.end() - 1)];
      st.total += c;
      st.distinct += c > 0;
    }
}

std::int64_t NGramModel::count(const Ngram& gram) const {
  if (gram.empty() || gram.size() > order_) return 0;
  const auto& table = counts_[gram.size() - 1];
  auto it = table.find(gram);
  return it == table.end() ? 0 : it->second;
}

double NGramModel::prob_at(std::size_t n, std::span<const std::int32_t> context, std::int32_t word) const {
  // context holds exactly n - 1 ids.
  const double d = discounts_[n - 1];
  const auto& stats = context_stats_[n - 1];
  const Ngram ctx(context.begin(), context.end());
  auto it = stats.find(ctx);
  const double lower = n == 1 ? 1.0 / static_cast<double>(predictable_size())
                              : prob_at(n - 1, context.subspan(1), word);
  if (it == stats.end() || it->second.total == 0) return lower;
  Ngram gram = ctx;
  gram.push_back(word);
  const double c = static_cast<double>(count(gram));
  const double total = static_cast<double>(it->second.total);
  return std::max(c - d, 0.0) / total + d * static_cast<double>(it->second.distinct) / total * lower;
}

double NGramModel::prob(std::span<const std::int32_t> history, std::int32_t word) const {
  if (order_ == 0) throw std::logic_error("n-gram model is not trained");
  if (word <= kBosId || word >= static_cast<std::int32_t>(tokens_.size()))
    throw std::out_of_range("n-gram prob: token id " + std::to_string(word) + " is not predictable");
  std::vector<std::int32_t> ctx(order_ - 1, kBosId);
  const std::size_t take = std::min(history.size(), order_ - 1);
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(), ctx.end() - static_cast<std::ptrdiff_t>(take));
  return prob_at(order_, ctx, word);
}

double NGramModel::prob(const std::vector<std::string>& history, const std::string& word) const {
  std::vector<std::int32_t> ids;
  for (const auto& h : history) ids.push_back(h == kBos ? kBosId : id(h));
  return prob(ids, id(word));
}

std::vector<double> NGramModel::distribution(std::span<const std::int32_t> history) const {
  std::vector<double> out;
  out.reserve(predictable_size());
  for (std::int32_t w = 1; w < static_cast<std::int32_t>(tokens_.size()); ++w) out.push_back(prob(history, w));
  return out;
}

double NGramModel::average_logprob(const std::vector<std::string>& sentence) const {
  if (order_ == 0) throw std::logic_error("n-gram model is not trained");
  if (sentence.empty()) throw std::invalid_argument("average_logprob: empty sentence");
  const auto ids = padded_ids(*this, sentence);
  double total = 0.0;
  for (std::size_t i = order_ - 1; i < ids.size(); ++i) {
    std::span<const std::int32_t> ctx(ids.data() + i + 1 - order_, order_ - 1);
    total += std::log(prob_at(order_, ctx, ids[i]));
  }
  return total / static_cast<double>(sentence.size() + 1);
}

void NGramModel::save(std::ostream& out) const {
  out << "swm-kneser-ney 1\n";
  out << "order " << order_ << '\n';
  out << "tokens " << tokens_.size() << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  for (std::size_t n = 1; n <= order_; ++n) {
    std::ostringstream d;
    d << std::setprecision(17) << discounts_[n - 1];
    out << "discount " << n << ' ' << d.str() << '\n';
  }
  for (std::size_t n = 1; n <= order_; ++n) {
    out << "counts " << n << ' ' << counts_[n - 1].size() << '\n';
    for (const auto& [g, c] : counts_[n - 1]) {
      for (std::size_t k = 0; k < g.size(); ++k) out << (k ? " " : "") << tokens_[static_cast<std::size_t>(g[k])];
      out << '\t' << c << '\n';
    }
  }
}

NGramModel NGramModel::load(std::istream& in, const std::string& source) {
  NGramModel m;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(source, lineno + 1, "unexpected end of model file");
    ++lineno;
    return line;
  };
  auto fields = [&](const std::string& l) { return text::tokenize(l); };
  if (next() != "swm-kneser-ney 1") throw ParseError(source, lineno, "not an swm-kneser-ney v1 model");
  try {
    auto f = fields(next());
    if (f.size() != 2 || f[0] != "order") throw ParseError(source, lineno, "expected 'order N'");
    m.order_ = std::stoul(f[1]);
    if (m.order_ < 1) throw ParseError(source, lineno, "order must be >= 1");
    f = fields(next());
    if (f.size() != 2 || f[0] != "tokens") throw ParseError(source, lineno, "expected 'tokens N'");
    const std::size_t ntok = std::stoul(f[1]);
    for (std::size_t i = 0; i < ntok; ++i) {
      m.tokens_.push_back(next());
      m.ids_[m.tokens_.back()] = static_cast<std::int32_t>(i);
    }
    if (ntok < 3 || m.tokens_[0] != kBos || m.tokens_[1] != kEos || m.tokens_[2] != kUnk)
      throw ParseError(source, lineno, "token table must start with <s>, </s>, <unk>");
    m.discounts_.resize(m.order_);
    for (std::size_t n = 1; n <= m.order_; ++n) {
      f = fields(next());
      if (f.size() != 3 || f[0] != "discount" || std::stoul(f[1]) != n)
        throw ParseError(source, lineno, "expected 'discount " + std::to_string(n) + " D'");
      m.discounts_[n - 1] = std::stod(f[2]);
      if (!(m.discounts_[n - 1] > 0 && m.discounts_[n - 1] < 1)) throw ParseError(source, lineno, "discount outside (0, 1)");
    }
    m.counts_.assign(m.order_, {});
    for (std::size_t n = 1; n <= m.order_; ++n) {
      f = fields(next());
      if (f.size() != 3 || f[0] != "counts" || std::stoul(f[1]) != n)
        throw ParseError(source, lineno, "expected 'counts " + std::to_string(n) + " K'");
      const std::size_t k = std::stoul(f[2]);
      for (std::size_t i = 0; i < k; ++i) {
        const std::string l = next();
        const auto tab = l.find('\t');
        if (tab == std::string::npos) throw ParseError(source, lineno, "expected 'tokens<TAB>count'");
        Ngram g;
        for (const auto& t : text::tokenize(std::string_view(l).substr(0, tab))) {
          auto it = m.ids_.find(t);
          if (it == m.ids_.end()) throw ParseError(source, lineno, "unknown token '" + t + "'");
          g.push_back(it->second);
        }
        if (g.size() != n) throw ParseError(source, lineno, "n-gram has wrong order");
        const long long c = std::stoll(l.substr(tab + 1));
        if (c < 0) throw ParseError(source, lineno, "negative count");
        m.counts_[n - 1][g] = c;
      }
    }
  } catch (const std::logic_error& e) {  // stoul / stod
    throw ParseError(source, lineno, std::string("bad number: ") + e.what());
  }
  m.rebuild_stats();
  return m;
}

double threshold_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] >= threshold ? 1 : 0) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

ThresholdClassifier fit_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("fit_threshold: scores/labels size mismatch");
  bool pos = false, neg = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("fit_threshold: labels must be 0/1");
    (l == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw std::invalid_argument("fit_threshold: validation set needs both labels");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("fit_threshold: non-finite score");

  std::vector<std::pair<double, int>> sorted;
  for (std::size_t i = 0; i < scores.size(); ++i) sorted.emplace_back(scores[i], labels[i]);
  std::sort(sorted.begin(), sorted.end());

  // Sweep thresholds upward. Below everything all predictions are rational.
  const std::size_t total = sorted.size();
  std::size_t negatives_below = 0, positives_below = 0;
  std::size_t positives = 0;
  for (auto& [s, l] : sorted) positives += l == 1;
  ThresholdClassifier best;
  best.threshold = sorted.front().first - 1.0;
  best.validation_accuracy = static_cast<double>(positives) / static_cast<double>(total);
  std::size_t i = 0;
  while (i < total) {
    const double v = sorted[i].first;
    while (i < total && sorted[i].first == v) {
      (sorted[i].second == 1 ? positives_below : negatives_below)++;
      ++i;
    }
    const double candidate = i < total ? v + (sorted[i].first - v) / 2.0 : v + 1.0;
    const double acc =
        static_cast<double>(negatives_below + (positives - positives_below)) / static_cast<double>(total);
    if (acc > best.validation_accuracy) {
      best.validation_accuracy = acc;
      best.threshold = candidate;
    }
  }
  return best;
}

std::vector<std::string> generate_sentence(const NGramModel& model, const GenerateOptions& options,
                                           std::mt19937_64& rng) {
  if (model.order() == 0) throw std::logic_error("n-gram model is not trained");
  if (options.max_length < options.min_length) throw std::invalid_argument("generate: max_length < min_length");
  std::vector<std::string> out = options.prefix;
  std::vector<std::int32_t> history;
  for (const auto& w : out) history.push_back(model.id(w));
  while (out.size() < options.max_length) {
    auto dist = model.distribution(history);
    // Index 0 is </s>; the <unk> slot (index 1) never produces a word.
    if (out.size() < options.min_length) dist[0] = 0.0;
    dist[1] = 0.0;
    std::size_t pick;
    if (options.argmax) {
      pick = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    } else {
      std::discrete_distribution<std::size_t> d(dist.begin(), dist.end());
      pick = d(rng);
    }
    const auto id = static_cast<std::int32_t>(pick + 1);
    if (id == 1) break;
    out.push_back(model.tokens()[static_cast<std::size_t>(id)]);
    history.push_back(id);
  }
  return out;
}

std::vector<std::vector<std::string>> lm_generate(const NGramModel& model, const GenerateOptions& options,
                                                  std::size_t count, std::mt19937_64& rng) {
  if (model.order() == 0) throw std::logic_error("n-gram model is not trained");
  std::vector<std::vector<std::string>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sentence(model, options, rng));
  return out;
}

}  // namespace swm
