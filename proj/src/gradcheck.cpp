#include "swm/gradcheck.hpp"

#include <random>

namespace swm {

TinyInstance tiny_instance(std::uint64_t seed) {
  SwmConfig config;
  config.word_vocab_size = 6;
  config.sememe_vocab_size = 8;
  config.word_dim = config.sememe_dim = config.hidden = config.attention_dim = 4;
  config.dropout = 0.0;
  config.max_length = 3;
  TinyInstance inst{config, SwmParams(config), {}, 1};
  inst.params.initialize(seed, 0.5);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> word(2, 5), sememe(2, 7);
  std::uniform_int_distribution<int> count(1, 2);
  for (int i = 0; i < 3; ++i) {
    inst.sentence.words.push_back(word(rng));
    std::vector<Sense> senses;
    // The first word always gets two senses so matching is exercised.
    const int n = i == 0 ? 2 : count(rng);
    for (int j = 0; j < n; ++j) {
      Sense s;
      for (int k = 0, m = count(rng); k < m; ++k) s.sememes.push_back(sememe(rng));
      senses.push_back(s);
    }
    inst.sentence.senses.push_back(std::move(senses));
  }
  inst.label = static_cast<int>(rng() & 1);
  return inst;
}

ad::GradCheckReport<double> check_variant_gradients(Variant variant, std::uint64_t seed, double h, double tol) {
  TinyInstance inst = tiny_instance(seed);
  SwmModel model(inst.config);
  std::vector<std::pair<std::string, ad::Array*>> used;
  for (auto& [name, p] : inst.params.named())
    if (variant_uses(variant, name)) used.emplace_back(name, p);
  auto loss = [&](ad::Tape& tape) {
    auto fwd = model.forward(tape, inst.params, inst.sentence, variant);
    return ad::softmax_cross_entropy(fwd.logits, inst.label);
  };
  return ad::finite_diff_check<double>(loss, used, h, tol);
}

}  // namespace swm
