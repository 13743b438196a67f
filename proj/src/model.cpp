#include "swm/model.hpp"

#include <sstream>
#include <stdexcept>

namespace swm {

namespace {

constexpr std::array<std::string_view, 6> kVariantNames = {"full",     "wo-match",    "wo-dual",
                                                          "wo-hownet", "wo-wordpart", "wo-cw"};

ad::Array matrix(std::size_t rows, std::size_t cols) {
  return ad::Array(ad::Shape{static_cast<ad::Index>(rows), static_cast<ad::Index>(cols)});
}

ad::Array vec(std::size_t n) { return ad::Array(ad::Shape{static_cast<ad::Index>(n)}); }

LstmDirection make_direction(std::size_t in, std::size_t hidden) {
  return {matrix(4 * hidden, in), matrix(4 * hidden, hidden), vec(4 * hidden)};
}

LocalAttention make_attention(std::size_t att, std::size_t d) { return {matrix(att, d), vec(att), vec(att)}; }

Eigen::VectorXd to_vector(const ad::Matrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

ad::Value apply_dropout(ad::Tape& tape, const ad::Value& x, const DropoutMode& dropout) {
  if (!dropout.active()) return x;
  std::bernoulli_distribution keep(1.0 - dropout.rate);
  const double scale = 1.0 / (1.0 - dropout.rate);
  ad::Matrix mask(x.value().rows(), x.value().cols());
  for (ad::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*dropout.rng) ? scale : 0.0;
  return x * tape.constant(x.shape(), std::move(mask));
}

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

std::optional<Variant> parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == name) return static_cast<Variant>(i);
  return std::nullopt;
}

std::string variant_list() {
  std::string out;
  for (auto n : kVariantNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

void SwmConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid model config: ") + what);
  };
  need(word_vocab_size >= 2, "word_vocab_size < 2");
  need(sememe_vocab_size >= 2, "sememe_vocab_size < 2");
  need(word_dim >= 1 && sememe_dim >= 1 && hidden >= 1 && attention_dim >= 1, "dimensions must be >= 1");
  need(num_classes == 2, "num_classes must be 2");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  need(max_length >= 1, "max_length < 1");
}

SwmParams::SwmParams(const SwmConfig& c)
    : word_embedding(matrix(c.word_vocab_size, c.word_dim)),
      sememe_embedding(matrix(c.sememe_vocab_size, c.sememe_dim)),
      word_lstm{make_direction(c.word_dim, c.hidden), make_direction(c.word_dim, c.hidden)},
      sememe_lstm{make_direction(c.sememe_dim, c.hidden), make_direction(c.sememe_dim, c.hidden)},
      word_attention(make_attention(c.attention_dim, 2 * c.hidden)),
      sememe_attention(make_attention(c.attention_dim, 2 * c.hidden)),
      match_context_proj(matrix(c.attention_dim, 2 * c.hidden)),
      match_sense_proj(matrix(c.attention_dim, c.sememe_dim)),
      classifier_word(matrix(c.num_classes, 2 * c.hidden)),
      classifier_sememe(matrix(c.num_classes, 2 * c.hidden)),
      classifier_bias(vec(c.num_classes)) {}

std::vector<std::pair<std::string, ad::Array*>> SwmParams::named() {
  std::vector<std::pair<std::string, ad::Array*>> out = {
      {"word_embedding", &word_embedding},
      {"sememe_embedding", &sememe_embedding},
  };
  auto lstm = [&](const std::string& prefix, BiLstm& l) {
    for (auto [dir, p] : {std::pair<const char*, LstmDirection*>{"forward", &l.forward}, {"backward", &l.backward}}) {
      const std::string base = prefix + "." + dir + ".";
      out.emplace_back(base + "input_weight", &p->input_weight);
      out.emplace_back(base + "recurrent_weight", &p->recurrent_weight);
      out.emplace_back(base + "bias", &p->bias);
    }
  };
  auto attention = [&](const std::string& prefix, LocalAttention& a) {
    out.emplace_back(prefix + ".weight", &a.weight);
    out.emplace_back(prefix + ".bias", &a.bias);
    out.emplace_back(prefix + ".context", &a.context);
  };
  lstm("word_lstm", word_lstm);
  lstm("sememe_lstm", sememe_lstm);
  attention("word_attention", word_attention);
  attention("sememe_attention", sememe_attention);
  out.emplace_back("match_context_proj", &match_context_proj);
  out.emplace_back("match_sense_proj", &match_sense_proj);
  out.emplace_back("classifier_word", &classifier_word);
  out.emplace_back("classifier_sememe", &classifier_sememe);
  out.emplace_back("classifier_bias", &classifier_bias);
  return out;
}

std::vector<std::pair<std::string, const ad::Array*>> SwmParams::named() const {
  std::vector<std::pair<std::string, const ad::Array*>> out;
  for (auto& [n, p] : const_cast<SwmParams*>(this)->named()) out.emplace_back(n, p);
  return out;
}

std::size_t SwmParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, p] : named()) n += static_cast<std::size_t>(p->size());
  return n;
}

void SwmParams::zero_grad() {
  for (auto& [name, p] : named()) p->zero_grad();
}

void SwmParams::initialize(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-scale, scale);
  for (auto& [name, p] : named()) {
    const bool is_bias = name.ends_with(".bias") || name == "classifier_bias";
    auto& v = p->values();
    for (ad::Index i = 0; i < v.size(); ++i) v.data()[i] = is_bias ? 0.0 : uniform(rng);
    p->zero_grad();
  }
  word_embedding.values().row(Vocabulary::kPad).setZero();
  sememe_embedding.values().row(Vocabulary::kPad).setZero();
}

bool variant_uses(Variant v, std::string_view name) {
  const bool word_emb = name == "word_embedding";
  const bool sememe_emb = name == "sememe_embedding";
  const bool word_lstm = name.starts_with("word_lstm.");
  const bool sememe_lstm = name.starts_with("sememe_lstm.");
  const bool word_att = name.starts_with("word_attention.");
  const bool sememe_att = name.starts_with("sememe_attention.");
  const bool match = name.starts_with("match_");
  const bool cls_word = name == "classifier_word";
  const bool cls_sememe = name == "classifier_sememe";
  const bool cls_bias = name == "classifier_bias";
  switch (v) {
    case Variant::kFull:
      return true;
    case Variant::kWoMatch:
      return !match;
    case Variant::kWoDualAttention:
      return !(word_att || sememe_att || match);
    case Variant::kWoHowNet:
      return word_emb || word_lstm || word_att || cls_word || cls_bias;
    case Variant::kWoWordPart:
      return sememe_emb || sememe_lstm || sememe_att || cls_sememe || cls_bias;
    case Variant::kWoWordCw:
      return !(word_att || cls_word);
  }
  return false;
}

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& words, SememeLexicon& lexicon,
                       bool intern) {
  EncodedSentence out;
  out.words.reserve(tokens.size());
  out.senses.reserve(tokens.size());
  for (const auto& t : tokens) {
    out.words.push_back(words.index_of(t));
    out.senses.push_back(intern ? lexicon.senses_of(t) : lexicon.lookup(t));
  }
  return out;
}

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& words,
                       const SememeLexicon& lexicon) {
  EncodedSentence out;
  for (const auto& t : tokens) {
    out.words.push_back(words.index_of(t));
    out.senses.push_back(lexicon.lookup(t));
  }
  return out;
}

namespace layers {

BoundLstm bind(ad::Tape& tape, LstmDirection& p) {
  return {ad::transpose(tape.param(p.input_weight)), ad::transpose(tape.param(p.recurrent_weight)),
          tape.param(p.bias)};
}

namespace {

// One direction over rows of the projected inputs, visiting `order`.
std::vector<ad::Value> run_direction(const ad::Value& projected, const ad::Value& recurrent_t, ad::Index hidden,
                                     bool reverse) {
  const ad::Index steps = projected.shape()[0];
  std::vector<ad::Value> outputs(static_cast<std::size_t>(steps));
  ad::Value h, c;
  for (ad::Index k = 0; k < steps; ++k) {
    const ad::Index t = reverse ? steps - 1 - k : k;
    ad::Value z = ad::row(projected, t);
    if (k > 0) z = z + ad::matmul(h, recurrent_t);
    ad::Value gates = ad::sigmoid(ad::slice(z, 0, 3 * hidden));
    ad::Value in = ad::slice(gates, 0, hidden);
    ad::Value forget = ad::slice(gates, hidden, hidden);
    ad::Value out = ad::slice(gates, 2 * hidden, hidden);
    ad::Value cand = ad::tanh(ad::slice(z, 3 * hidden, hidden));
    c = k > 0 ? forget * c + in * cand : in * cand;
    h = out * ad::tanh(c);
    outputs[static_cast<std::size_t>(t)] = h;
  }
  return outputs;
}

}  // namespace

ad::Value bilstm_encode(ad::Tape& tape, const ad::Value& inputs, BiLstm& params) {
  if (inputs.shape().size() != 2 || inputs.shape()[0] < 1)
    throw ad::ShapeError("bilstm_encode: inputs must be {L >= 1, in}, got " + ad::to_string(inputs.shape()));
  if (inputs.shape()[1] != params.forward.input_weight.shape()[1])
    throw ad::ShapeError("bilstm_encode: input dim " + std::to_string(inputs.shape()[1]) + " but weights expect " +
                         std::to_string(params.forward.input_weight.shape()[1]));
  const ad::Index hidden = params.forward.recurrent_weight.shape()[1];
  auto direction = [&](LstmDirection& p, bool reverse) {
    BoundLstm b = bind(tape, p);
    ad::Value projected = ad::add_bias(ad::matmul(inputs, b.input_weight_t), b.bias);
    auto steps = run_direction(projected, b.recurrent_weight_t, hidden, reverse);
    return ad::stack_rows<double>(steps);
  };
  ad::Value fw = direction(params.forward, false);
  ad::Value bw = direction(params.backward, true);
  return ad::concat(fw, bw, 1);
}

AttentionResult local_attention(ad::Tape& tape, const ad::Value& outputs, LocalAttention& params) {
  ad::Value w = tape.param(params.weight);
  ad::Value b = tape.param(params.bias);
  ad::Value u = tape.param(params.context);
  ad::Value hidden = ad::tanh(ad::add_bias(ad::matmul(outputs, ad::transpose(w)), b));  // {L, a}
  ad::Value weights = ad::softmax(ad::matmul(u, ad::transpose(hidden)));              // {L}
  return {weights, ad::matmul(weights, outputs)};
}

ad::Value sense_embed(const ad::Value& sememe_table, const Sense& sense) {
  if (sense.sememes.empty()) throw std::invalid_argument("sense_embed: empty sense");
  return ad::mean_rows(ad::gather_rows<double>(sememe_table, sense.sememes));
}

ad::Value sense_matrix(const ad::Value& sememe_table, const std::vector<Sense>& senses) {
  if (senses.empty()) throw std::invalid_argument("sense_matrix: word without senses");
  std::vector<ad::Value> rows;
  rows.reserve(senses.size());
  for (const auto& s : senses) rows.push_back(sense_embed(sememe_table, s));
  return ad::stack_rows<double>(rows);
}

MatchResult match_senses(const ad::Value& projected_context, const ad::Value& senses,
                         const ad::Value& sense_proj_t) {
  ad::Value keys = ad::tanh(ad::matmul(senses, sense_proj_t));                    // {n, a}
  ad::Value weights = ad::softmax(ad::matmul(projected_context, ad::transpose(keys)));  // {n}
  return {weights, ad::matmul(weights, senses)};
}

ad::Value classify_logits(ad::Tape& tape, const ad::Value* word_context, const ad::Value* sememe_context,
                          SwmParams& params) {
  ad::Value logits = tape.param(params.classifier_bias);
  if (word_context) logits = logits + ad::matmul(*word_context, ad::transpose(tape.param(params.classifier_word)));
  if (sememe_context)
    logits = logits + ad::matmul(*sememe_context, ad::transpose(tape.param(params.classifier_sememe)));
  return logits;
}

}  // namespace layers

ForwardResult SwmModel::forward(ad::Tape& tape, SwmParams& params, const EncodedSentence& sentence,
                                Variant variant, DropoutMode dropout) const {
  const std::size_t length = sentence.words.size();
  if (length == 0) throw std::invalid_argument("forward: empty sentence");
  if (length > config_.max_length)
    throw std::invalid_argument("forward: sentence length " + std::to_string(length) + " exceeds max_length " +
                                std::to_string(config_.max_length));
  if (sentence.senses.size() != length) throw std::invalid_argument("forward: senses/words length mismatch");

  const bool word_part = variant != Variant::kWoWordPart;
  const bool sememe_part = variant != Variant::kWoHowNet;
  const bool attention = variant != Variant::kWoDualAttention;
  const bool matching = variant == Variant::kFull || variant == Variant::kWoWordCw;
  const bool use_word_context = word_part && variant != Variant::kWoWordCw;

  ForwardTrace trace;
  ad::Value word_outputs, word_context, sememe_context;

  if (word_part) {
    std::vector<ad::Index> ids(sentence.words.begin(), sentence.words.end());
    ad::Value embedded = ad::gather_rows<double>(tape.param(params.word_embedding), ids);
    embedded = apply_dropout(tape, embedded, dropout);
    word_outputs = layers::bilstm_encode(tape, embedded, params.word_lstm);
    trace.word_outputs = word_outputs.value();
    if (attention) {
      auto att = layers::local_attention(tape, word_outputs, params.word_attention);
      trace.word_attention = to_vector(att.weights.value());
      word_context = att.context;
    } else {
      word_context = ad::mean_rows(word_outputs);
    }
    trace.word_context = to_vector(word_context.value());
  }

  if (sememe_part) {
    ad::Value table = tape.param(params.sememe_embedding);
    std::vector<ad::Value> summaries;
    summaries.reserve(length);
    if (matching) {
      ad::Value projected = ad::tanh(ad::matmul(word_outputs, ad::transpose(tape.param(params.match_context_proj))));
      ad::Value sense_proj_t = ad::transpose(tape.param(params.match_sense_proj));
      trace.matching.emplace();
      for (std::size_t i = 0; i < length; ++i) {
        ad::Value senses = layers::sense_matrix(table, sentence.senses[i]);
        auto m = layers::match_senses(ad::row(projected, static_cast<ad::Index>(i)), senses, sense_proj_t);
        trace.matching->push_back(to_vector(m.weights.value()));
        summaries.push_back(m.summary);
      }
    } else {
      for (std::size_t i = 0; i < length; ++i)
        summaries.push_back(ad::mean_rows(layers::sense_matrix(table, sentence.senses[i])));
    }
    ad::Value sememe_inputs = ad::stack_rows<double>(summaries);
    trace.sememe_inputs = sememe_inputs.value();
    ad::Value sememe_outputs = layers::bilstm_encode(tape, sememe_inputs, params.sememe_lstm);
    trace.sememe_outputs = sememe_outputs.value();
    if (attention) {
      auto att = layers::local_attention(tape, sememe_outputs, params.sememe_attention);
      trace.sememe_attention = to_vector(att.weights.value());
      sememe_context = att.context;
    } else {
      sememe_context = ad::mean_rows(sememe_outputs);
    }
    trace.sememe_context = to_vector(sememe_context.value());
  }

  ad::Value cw = use_word_context ? apply_dropout(tape, word_context, dropout) : ad::Value{};
  ad::Value cs = sememe_part ? apply_dropout(tape, sememe_context, dropout) : ad::Value{};
  ad::Value logits = layers::classify_logits(tape, use_word_context ? &cw : nullptr, sememe_part ? &cs : nullptr,
                                             params);
  trace.probabilities = to_vector(ad::softmax(logits).value());
  return {logits, std::move(trace)};
}

ForwardTrace SwmModel::predict(const SwmParams& params, const EncodedSentence& sentence, Variant variant) const {
  ad::Tape tape;
  // No backward runs on this tape, so the bound gradients are never written.
  return forward(tape, const_cast<SwmParams&>(params), sentence, variant).trace;
}

}  // namespace swm
