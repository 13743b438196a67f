#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swm/checkpoint.hpp"
#include "swm/dataset.hpp"
#include "swm/model.hpp"

namespace swm {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::size_t epochs = 20;
  std::size_t validate_every = 200;  // optimizer updates
  std::size_t batch_size = 1;        // examples per update
  std::size_t word_vocab_capacity = 50000;
  std::uint64_t seed = 1;
  Variant variant = Variant::kFull;
  unsigned eval_threads = 1;

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// -log p[label] for a probability vector.
double cross_entropy(const Eigen::VectorXd& probabilities, int label);

using NamedParams = std::vector<std::pair<std::string, ad::Array*>>;

double global_grad_norm(const NamedParams& params);

/// Rescales every gradient by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns whether scaling happened.
bool clip_gradients(const NamedParams& params, double max_norm);

struct OptimizerState {
  std::vector<ad::Matrix> first_moment;
  std::vector<ad::Matrix> second_moment;
  std::uint64_t step = 0;

  explicit OptimizerState(const NamedParams& params);
};

/// Bias-corrected Adam update, then zeroes the gradients.
void adam_step(const NamedParams& params, OptimizerState& state, const TrainConfig& config);

struct LogRow {
  std::size_t update = 0;
  double train_loss = 0.0;  // mean loss over updates since the previous row
  double valid_accuracy = 0.0;
};

void write_log(std::ostream& out, const std::vector<LogRow>& log);

struct TrainResult {
  Checkpoint best;
  std::vector<LogRow> log;
  double best_valid_accuracy = 0.0;
  std::size_t best_update = 0;
};

/// Encodes a dataset without growing any vocabulary.
std::vector<EncodedSentence> encode_all(const Dataset& data, const Vocabulary& words, const SememeLexicon& lexicon);

/// Fraction of examples whose argmax class equals the label. Exact 0.5/0.5
/// ties predict class 0. Work is split over `threads` workers.
double evaluate(const SwmModel& model, const SwmParams& params, const std::vector<EncodedSentence>& inputs,
                const Dataset& data, Variant variant, unsigned threads = 1);

/// Builds the word vocabulary from `train`, interns out-of-lexicon training
/// words as their own sememes, then runs Adam with clipping and keeps the
/// parameters with the best validation accuracy (earliest on ties).
TrainResult train(SwmConfig model_config, const Dataset& train_set, const Dataset& valid_set, SememeLexicon lexicon,
                  const TrainConfig& config, std::ostream* progress = nullptr);

/// Lexicon whose sememe vocabulary is the checkpoint's (frozen).
SememeLexicon lexicon_for(const Checkpoint& ckpt, const std::string& lexicon_path);
SememeLexicon lexicon_for(const Checkpoint& ckpt, const SememeLexicon& base);

/// Accuracy of a checkpoint's own variant on `data`.
double evaluate_checkpoint(const Checkpoint& ckpt, const SememeLexicon& lexicon, const Dataset& data,
                           unsigned threads = 1);

}  // namespace swm
