#pragma once

// Sememe-word matching network: word-level attention Bi-LSTM, per-word
// matching attention over sense embeddings, sememe-level attention Bi-LSTM
// and a softmax classifier over both sentence vectors. Five ablations
// reuse the same parameters and engine.

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swm/autodiff.hpp"
#include "swm/lexicon.hpp"

namespace swm {

enum class Variant { kFull, kWoMatch, kWoDualAttention, kWoHowNet, kWoWordPart, kWoWordCw };

inline constexpr std::array<Variant, 6> kAllVariants = {Variant::kFull,     Variant::kWoMatch,
                                                        Variant::kWoDualAttention, Variant::kWoHowNet,
                                                        Variant::kWoWordPart,      Variant::kWoWordCw};

/// CLI spelling: full, wo-match, wo-dual, wo-hownet, wo-wordpart, wo-cw.
std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
std::string variant_list();

struct SwmConfig {
  std::size_t word_vocab_size = 50000;
  std::size_t sememe_vocab_size = 20000;
  std::size_t word_dim = 128;
  std::size_t sememe_dim = 128;
  std::size_t hidden = 128;  // per LSTM direction
  std::size_t attention_dim = 128;
  std::size_t num_classes = 2;
  double dropout = 0.5;
  std::size_t max_length = 200;

  void validate() const;
  bool operator==(const SwmConfig&) const = default;
};

struct LstmDirection {
  ad::Array input_weight;      // 4H x in, gate rows ordered i, f, o, g
  ad::Array recurrent_weight;  // 4H x H
  ad::Array bias;              // 4H
};

struct BiLstm {
  LstmDirection forward;
  LstmDirection backward;
};

struct LocalAttention {
  ad::Array weight;   // a x d
  ad::Array bias;     // a
  ad::Array context;  // a, the learned query vector
};

struct SwmParams {
  ad::Array word_embedding;
  ad::Array sememe_embedding;
  BiLstm word_lstm;
  BiLstm sememe_lstm;
  LocalAttention word_attention;
  LocalAttention sememe_attention;
  ad::Array match_context_proj;  // a x 2H, applied to word outputs
  ad::Array match_sense_proj;    // a x sememe_dim, applied to sense embeddings
  ad::Array classifier_word;     // C x 2H
  ad::Array classifier_sememe;   // C x 2H
  ad::Array classifier_bias;     // C

  /// Zero-valued parameters with the shapes `config` implies.
  explicit SwmParams(const SwmConfig& config);
  SwmParams(const SwmParams&) = default;
  SwmParams& operator=(const SwmParams&) = default;

  /// Uniform(-scale, scale) for matrices and attention queries, zero biases,
  /// zero PAD embedding rows.
  void initialize(std::uint64_t seed, double scale = 0.08);

  std::vector<std::pair<std::string, ad::Array*>> named();
  std::vector<std::pair<std::string, const ad::Array*>> named() const;

  std::size_t parameter_count() const;
  void zero_grad();
};

/// Parameter names an ablation variant actually reads into its loss.
bool variant_uses(Variant v, std::string_view param_name);

/// A sentence resolved against the vocabularies: word ids plus each word's
/// senses (sememe ids). Sense lists are never empty.
struct EncodedSentence {
  std::vector<TokenId> words;
  std::vector<std::vector<Sense>> senses;
};

/// Resolves tokens. With `intern` the lexicon may grow its sememe vocabulary
/// for out-of-lexicon words; otherwise those map to existing ids or UNK.
EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& words, SememeLexicon& lexicon,
                       bool intern);
EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& words,
                       const SememeLexicon& lexicon);

struct ForwardTrace {
  Eigen::MatrixXd word_outputs;                  // L x 2H (absent for wo-wordpart: 0 x 0)
  std::optional<Eigen::VectorXd> word_attention;  // L
  std::optional<Eigen::VectorXd> word_context;
  std::optional<std::vector<Eigen::VectorXd>> matching;  // per word, n_i weights
  Eigen::MatrixXd sememe_inputs;                 // L x sememe_dim (0 x 0 for wo-hownet)
  Eigen::MatrixXd sememe_outputs;
  std::optional<Eigen::VectorXd> sememe_attention;
  std::optional<Eigen::VectorXd> sememe_context;
  Eigen::Vector2d probabilities;
};

/// Dropout source; a null rng or zero rate disables it.
struct DropoutMode {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rng != nullptr && rate > 0.0; }
};

struct ForwardResult {
  ad::Value logits;
  ForwardTrace trace;
};

class SwmModel {
 public:
  explicit SwmModel(const SwmConfig& config) : config_(config) { config_.validate(); }

  const SwmConfig& config() const { return config_; }

  /// Builds the variant's graph on `tape`. Parameters are bound in place.
  ForwardResult forward(ad::Tape& tape, SwmParams& params, const EncodedSentence& sentence, Variant variant,
                        DropoutMode dropout = {}) const;

  /// Class probabilities with dropout off.
  ForwardTrace predict(const SwmParams& params, const EncodedSentence& sentence, Variant variant) const;

 private:
  SwmConfig config_;
};

// Building blocks, exposed for testing.
namespace layers {

struct BoundLstm {
  ad::Value input_weight_t, recurrent_weight_t, bias;
};

BoundLstm bind(ad::Tape& tape, LstmDirection& p);

/// Bi-LSTM over the rows of `inputs` ({L, in}); returns {L, 2H} outputs
/// [forward; backward] per step.
ad::Value bilstm_encode(ad::Tape& tape, const ad::Value& inputs, BiLstm& params);

struct AttentionResult {
  ad::Value weights;  // {L}
  ad::Value context;  // {d}
};

/// u_i = tanh(W o_i + b); weights = softmax(u_i . u); context = sum_i w_i o_i.
AttentionResult local_attention(ad::Tape& tape, const ad::Value& outputs, LocalAttention& params);

/// Mean of the sememe embeddings of one sense.
ad::Value sense_embed(const ad::Value& sememe_table, const Sense& sense);

/// {n, sememe_dim} matrix of a word's sense embeddings.
ad::Value sense_matrix(const ad::Value& sememe_table, const std::vector<Sense>& senses);

struct MatchResult {
  ad::Value weights;  // {n}
  ad::Value summary;  // {sememe_dim}
};

/// score_j = tanh(Wx o) . tanh(Wy s_j); weights = softmax(score);
/// summary = sum_j weights_j s_j. `projected_context` is tanh(Wx o) ({a})
/// and `sense_proj_t` is Wy^T.
MatchResult match_senses(const ad::Value& projected_context, const ad::Value& senses,
                         const ad::Value& sense_proj_t);

/// Softmax logits W^w c^w + W^s c^s + b; either context may be absent.
ad::Value classify_logits(ad::Tape& tape, const ad::Value* word_context, const ad::Value* sememe_context,
                          SwmParams& params);

}  // namespace layers

}  // namespace swm
