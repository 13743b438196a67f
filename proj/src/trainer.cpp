#include "swm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace swm {

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid train config: ") + what);
  };
  need(clip_norm > 0, "clip_norm must be > 0");
  need(epochs >= 1, "epochs must be >= 1");
  need(validate_every >= 1, "validate_every must be >= 1");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(learning_rate >= 0, "learning_rate must be >= 0");
  need(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  need(epsilon > 0, "epsilon must be > 0");
  need(word_vocab_capacity >= 3, "word vocabulary capacity must be >= 3");
}

double cross_entropy(const Eigen::VectorXd& p, int label) {
  if (label < 0 || label >= p.size()) throw std::out_of_range("cross_entropy: invalid label " + std::to_string(label));
  return -std::log(p(label));
}

double global_grad_norm(const NamedParams& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params) sq += p->grad().squaredNorm();
  return std::sqrt(sq);
}

bool clip_gradients(const NamedParams& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return false;
  const double s = max_norm / norm;
  for (const auto& [name, p] : params) p->grad() *= s;
  return true;
}

OptimizerState::OptimizerState(const NamedParams& params) {
  for (const auto& [name, p] : params) {
    first_moment.push_back(ad::Matrix::Zero(p->values().rows(), p->values().cols()));
    second_moment.push_back(ad::Matrix::Zero(p->values().rows(), p->values().cols()));
  }
}

void adam_step(const NamedParams& params, OptimizerState& state, const TrainConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k].second;
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto g = p.grad().array();
    m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * g;
    v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.square();
    p.values().array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
    p.zero_grad();
  }
}

void write_log(std::ostream& out, const std::vector<LogRow>& log) {
  for (const auto& row : log) {
    std::ostringstream line;
    line << row.update << '\t' << std::setprecision(10) << row.train_loss << '\t' << row.valid_accuracy << '\n';
    out << line.str();
  }
}

std::vector<EncodedSentence> encode_all(const Dataset& data, const Vocabulary& words, const SememeLexicon& lexicon) {
  std::vector<EncodedSentence> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(encode(ex.tokens, words, lexicon));
  return out;
}

double evaluate(const SwmModel& model, const SwmParams& params, const std::vector<EncodedSentence>& inputs,
                const Dataset& data, Variant variant, unsigned threads) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (inputs.size() != data.size()) throw std::invalid_argument("evaluate: inputs/dataset size mismatch");
  std::vector<char> correct(data.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = model.predict(params, inputs[i], variant).probabilities;
      const int predicted = p(1) > p(0) ? 1 : 0;
      correct[i] = predicted == data[i].label;
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(data.size())));
  if (threads == 1) {
    work(0, data.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (data.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(data.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(SwmConfig model_config, const Dataset& train_set, const Dataset& valid_set, SememeLexicon lexicon,
                  const TrainConfig& config, std::ostream* progress) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (valid_set.empty()) throw std::invalid_argument("train: empty validation set");

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(train_set.size());
  for (const auto& ex : train_set) corpus.push_back(ex.tokens);
  Vocabulary words = build_vocab(corpus, config.word_vocab_capacity);

  std::vector<EncodedSentence> train_inputs;
  train_inputs.reserve(train_set.size());
  for (const auto& ex : train_set) train_inputs.push_back(encode(ex.tokens, words, lexicon, /*intern=*/true));
  lexicon.sememe_vocab().freeze();
  const auto valid_inputs = encode_all(valid_set, words, lexicon);

  model_config.word_vocab_size = words.size();
  model_config.sememe_vocab_size = lexicon.sememe_vocab().size();
  for (const auto& ex : train_set)
    model_config.max_length = std::max(model_config.max_length, ex.tokens.size());
  for (const auto& ex : valid_set)
    model_config.max_length = std::max(model_config.max_length, ex.tokens.size());
  SwmModel model(model_config);
  SwmParams params(model_config);
  params.initialize(config.seed);

  auto named = params.named();
  OptimizerState state(named);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const DropoutMode dropout{model_config.dropout, &rng};

  TrainResult result{Checkpoint(model_config, config.variant, words, lexicon.sememe_vocab(), params), {}, -1.0, 0};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t updates = 0;
  double window_loss = 0.0;
  std::size_t window_updates = 0;
  double batch_loss = 0.0;
  std::size_t in_batch = 0;

  auto validate_now = [&] {
    const double acc = evaluate(model, params, valid_inputs, valid_set, config.variant, config.eval_threads);
    const double mean_loss = window_updates ? window_loss / static_cast<double>(window_updates) : 0.0;
    result.log.push_back({updates, mean_loss, acc});
    if (progress)
      *progress << "update " << updates << "  loss " << mean_loss << "  valid_acc " << acc << std::endl;
    if (acc > result.best_valid_accuracy) {
      result.best_valid_accuracy = acc;
      result.best_update = updates;
      result.best.params = params;
    }
    window_loss = 0.0;
    window_updates = 0;
  };

  auto apply_update = [&] {
    const double inv = 1.0 / static_cast<double>(in_batch);
    if (in_batch > 1)
      for (auto& [name, p] : named) p->grad() *= inv;
    // PAD rows stay zero.
    params.word_embedding.grad().row(Vocabulary::kPad).setZero();
    params.sememe_embedding.grad().row(Vocabulary::kPad).setZero();
    clip_gradients(named, config.clip_norm);
    adam_step(named, state, config);
    ++updates;
    window_loss += batch_loss * inv;
    ++window_updates;
    batch_loss = 0.0;
    in_batch = 0;
    if (updates % config.validate_every == 0) validate_now();
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      ad::Tape tape;
      auto fwd = model.forward(tape, params, train_inputs[idx], config.variant, dropout);
      auto loss = ad::softmax_cross_entropy(fwd.logits, train_set[idx].label);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite loss " << value << " at update " << updates << " (epoch " << epoch << ", example "
           << idx << ")";
        throw TrainingError(os.str());
      }
      tape.backward(loss);
      batch_loss += value;
      if (++in_batch == config.batch_size) apply_update();
    }
    if (in_batch > 0) apply_update();
  }
  if (result.log.empty() || result.log.back().update != updates) validate_now();
  return result;
}

SememeLexicon lexicon_for(const Checkpoint& ckpt, const std::string& lexicon_path) {
  Vocabulary sememes = ckpt.sememe_vocab;
  sememes.freeze();
  SememeLexicon lex = load_lexicon(lexicon_path, std::move(sememes));
  return lex;
}

SememeLexicon lexicon_for(const Checkpoint& ckpt, const SememeLexicon& base) {
  Vocabulary sememes = ckpt.sememe_vocab;
  sememes.freeze();
  SememeLexicon lex(std::move(sememes));
  for (const auto& [word, entry] : base.entries()) {
    std::vector<std::vector<std::string>> senses;
    for (const auto& sense : entry.senses) {
      senses.emplace_back();
      for (auto id : sense.sememes) senses.back().push_back(base.sememe_vocab().token(id));
    }
    lex.add(word, senses);
  }
  return lex;
}

double evaluate_checkpoint(const Checkpoint& ckpt, const SememeLexicon& lexicon, const Dataset& data,
                           unsigned threads) {
  SwmModel model(ckpt.config);
  return evaluate(model, ckpt.params, encode_all(data, ckpt.word_vocab, lexicon), data, ckpt.variant, threads);
}

}  // namespace swm
