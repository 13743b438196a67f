// swm: dataset generation, training, evaluation and baselines for the
// sememe-word matching rationality classifier.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "swm/checkpoint.hpp"
#include "swm/datagen.hpp"
#include "swm/gradcheck.hpp"
#include "swm/manifest.hpp"
#include "swm/ngram.hpp"
#include "swm/synthetic.hpp"
#include "swm/text.hpp"
#include "swm/trainer.hpp"

namespace fs = std::filesystem;
using namespace swm;

namespace {

// Bad flags, missing or malformed inputs: exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string config;
  std::vector<std::string> argv;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value file; explicit flags take precedence");
  sub->add_option("--seed", c.seed, "Random seed (else RATIONALITY_SEED, else 1)")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

// Precedence: explicit flag, then config file, then RATIONALITY_SEED for the
// seed, then the built-in default.
void resolve_settings(CLI::App* sub, Common& c) {
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw UsageError("cannot open config file " + c.config);
    for (const auto& item : CLI::ConfigINI().from_config(in)) {
      if (item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty() && item.parents != std::vector<std::string>{sub->get_name()}) continue;
      std::string key = item.name;
      std::replace(key.begin(), key.end(), '_', '-');
      CLI::Option* opt = sub->get_option_no_throw("--" + key);
      if (!opt || key == "config" || key == "help") throw UsageError(c.config + ": unknown key '" + item.name + "'");
      if (opt->count() > 0) continue;
      for (const auto& v : item.inputs) opt->add_result(v);
      try {
        opt->run_callback();
      } catch (const CLI::ParseError& e) {
        throw UsageError(c.config + ": bad value for '" + item.name + "': " + e.what());
      }
    }
  }
  CLI::Option* seed = sub->get_option("--seed");
  if (seed->count() == 0) {
    if (const char* env = std::getenv("RATIONALITY_SEED"); env && *env) {
      seed->add_result(env);
      try {
        seed->run_callback();
      } catch (const CLI::ParseError& e) {
        throw UsageError(std::string("RATIONALITY_SEED is not a valid seed: ") + env);
      }
    }
  }
}

RunManifest start_manifest(const CLI::App* sub, const Common& c) {
  RunManifest m;
  m.command = sub->get_name();
  m.argv = c.argv;
  m.seed = c.seed;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      value = text::join(opt->results(), ",");
    } else if (!opt->get_default_str().empty()) {
      value = opt->get_default_str();
    } else if (opt->get_type_size() == 0) {
      value = "false";
    }
    m.config[name] = value;
  }
  return m;
}

std::string out_path(const Common& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

void finish(RunManifest& m, const Common& c) {
  fs::create_directories(c.out);
  m.write(out_path(c, m.command + ".manifest.json"));
}

std::string require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("no such file: " + path);
  return path;
}

Dataset load_split(const std::string& dir, const std::string& split, RunManifest& m) {
  const auto path = require_file((fs::path(dir) / (split + ".tsv")).string());
  m.add_input(path);
  return load_dataset(path);
}

Variant variant_or_usage(const std::string& name) {
  auto v = parse_variant(name);
  if (!v) throw UsageError("unknown variant '" + name + "'; valid variants: " + variant_list());
  return *v;
}

std::vector<std::vector<std::string>> positives(const Dataset& data) {
  std::vector<std::vector<std::string>> out;
  for (const auto& ex : data)
    if (ex.label == 1) out.push_back(ex.tokens);
  return out;
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

// --- model options shared by train and ablate -------------------------------

struct ModelFlags {
  SwmConfig model;
  TrainConfig train;
  std::string data;
  std::string lexicon;

  ModelFlags() {
    model.word_vocab_size = 50000;
    model.sememe_vocab_size = 20000;
  }
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--data", f.data, "Directory with train.tsv and valid.tsv (and test.tsv)")->required();
  sub->add_option("--lexicon", f.lexicon, "Sememe lexicon (word<TAB>sememe,... | ...)")->required();
  sub->add_option("--word-dim", f.model.word_dim)->capture_default_str();
  sub->add_option("--sememe-dim", f.model.sememe_dim)->capture_default_str();
  sub->add_option("--hidden", f.model.hidden, "LSTM hidden size per direction")->capture_default_str();
  sub->add_option("--attention-dim", f.model.attention_dim)->capture_default_str();
  sub->add_option("--dropout", f.model.dropout)->capture_default_str();
  sub->add_option("--sememe-vocab", f.model.sememe_vocab_size, "Sememe vocabulary capacity")->capture_default_str();
  sub->add_option("--word-vocab", f.train.word_vocab_capacity, "Word vocabulary capacity")->capture_default_str();
  sub->add_option("--lr", f.train.learning_rate)->capture_default_str();
  sub->add_option("--clip", f.train.clip_norm, "Global gradient norm limit")->capture_default_str();
  sub->add_option("--epochs", f.train.epochs)->capture_default_str();
  sub->add_option("--validate-every", f.train.validate_every, "Updates between validations")->capture_default_str();
  sub->add_option("--batch-size", f.train.batch_size)->capture_default_str();
  sub->add_option("--threads", f.train.eval_threads, "Evaluation threads")->capture_default_str();
}

SememeLexicon load_training_lexicon(const ModelFlags& f, RunManifest& m) {
  require_file(f.lexicon);
  m.add_input(f.lexicon);
  return load_lexicon(f.lexicon, Vocabulary(f.model.sememe_vocab_size));
}

// --- commands ----------------------------------------------------------------

struct GenDataFlags {
  std::string corpus;
  std::string mode = "mixed";
  std::size_t min_length = 8;
  std::vector<double> ratios = {0.8, 0.1, 0.1};
  std::vector<std::size_t> max_positives;
  std::vector<std::string> punctuation;
  std::size_t lm_order = 5;
};

int cmd_gen_data(const CLI::App* sub, const Common& c, const GenDataFlags& f) {
  auto m = start_manifest(sub, c);
  require_file(f.corpus);
  auto mode = parse_perturb_mode(f.mode);
  if (!mode)
    throw UsageError("unknown mode '" + f.mode +
                     "'; valid modes: replace1, replace2, swap-same-pos, swap-random, mixed, lm-gen, dataset1..dataset4");
  if (f.ratios.size() != 3) throw UsageError("--ratios needs three values");
  if (!f.max_positives.empty() && f.max_positives.size() != 3) throw UsageError("--max-positives needs three values");
  m.add_input(f.corpus);
  const Corpus corpus = load_corpus(f.corpus);

  PerturbPolicy policy;
  policy.mode = *mode;
  policy.min_length = f.min_length;
  policy.seed = c.seed;
  policy.lm_order = f.lm_order;
  if (!f.punctuation.empty()) policy.punctuation_tags = {f.punctuation.begin(), f.punctuation.end()};
  std::optional<std::array<std::size_t, 3>> caps;
  if (!f.max_positives.empty()) caps = std::array{f.max_positives[0], f.max_positives[1], f.max_positives[2]};
  const auto splits = build_dataset(corpus.sentences, policy, {f.ratios[0], f.ratios[1], f.ratios[2]}, caps);

  fs::create_directories(c.out);
  for (const auto& [name, data] : {std::pair{"train", &splits.train}, {"valid", &splits.valid}, {"test", &splits.test}}) {
    save_dataset(out_path(c, std::string(name) + ".tsv"), *data);
    m.outputs.push_back(out_path(c, std::string(name) + ".tsv"));
  }
  std::ofstream summary(out_path(c, "summary.tsv"), std::ios::binary);
  write_summary(summary, {{"train", count_labels(splits.train)},
                          {"valid", count_labels(splits.valid)},
                          {"test", count_labels(splits.test)}});
  summary.close();
  m.outputs.push_back(out_path(c, "summary.tsv"));
  std::cout << "sentences " << corpus.sentences.size() << " (empty lines skipped " << corpus.skipped_empty << ")\n";
  std::cout << "train " << splits.train.size() << "  valid " << splits.valid.size() << "  test " << splits.test.size()
            << "  skipped " << splits.skipped << '\n';
  for (const auto& [reason, n] : splits.skip_reasons) std::cout << "  skip '" << reason << "': " << n << '\n';
  finish(m, c);
  return 0;
}

struct GenSynthFlags {
  std::size_t train = 1200, valid = 150, test = 150;
  double held_out = 0.25;
};

int cmd_gen_synth(const CLI::App* sub, const Common& c, const GenSynthFlags& f) {
  auto m = start_manifest(sub, c);
  SynthSpec spec = default_synth_spec(c.seed);
  spec.train_positives = f.train;
  spec.valid_positives = f.valid;
  spec.test_positives = f.test;
  spec.held_out_fraction = f.held_out;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto data = gen_synthetic(spec);
  write_synthetic(data, c.out);
  for (const char* name : {"lexicon.tsv", "corpus.txt", "train.tsv", "valid.tsv", "test.tsv", "summary.tsv"})
    m.outputs.push_back(out_path(c, name));
  std::cout << "nouns " << spec.noun_count() << " (polysemous " << fixed(spec.polysemous_fraction(), 2)
            << ", held out " << data.held_out.size() << ")\n";
  std::cout << "train " << data.train.size() << "  valid " << data.valid.size() << "  test " << data.test.size()
            << '\n';
  finish(m, c);
  return 0;
}

int cmd_train(const CLI::App* sub, const Common& c, ModelFlags f, const std::string& variant, bool quiet) {
  auto m = start_manifest(sub, c);
  f.train.variant = variant_or_usage(variant);
  f.train.seed = c.seed;
  auto lexicon = load_training_lexicon(f, m);
  const auto train_set = load_split(f.data, "train", m);
  const auto valid_set = load_split(f.data, "valid", m);
  try {
    f.model.validate();
    f.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto result = train(f.model, train_set, valid_set, std::move(lexicon), f.train, quiet ? nullptr : &std::cerr);

  fs::create_directories(c.out);
  save_checkpoint(out_path(c, "model.ckpt"), result.best);
  std::ofstream log(out_path(c, "train_log.tsv"), std::ios::binary);
  write_log(log, result.log);
  log.close();
  m.outputs = {out_path(c, "model.ckpt"), out_path(c, "train_log.tsv")};
  std::cout << "best valid accuracy " << fixed(result.best_valid_accuracy) << " at update " << result.best_update
            << '\n';
  finish(m, c);
  return 0;
}

void dump_attention(std::ostream& out, const Dataset& data, const std::vector<EncodedSentence>& inputs,
                    const SwmModel& model, const Checkpoint& ckpt) {
  auto row = [&](std::size_t i, const char* what, const Eigen::VectorXd& w) {
    out << i << '\t' << what;
    for (Eigen::Index k = 0; k < w.size(); ++k) out << '\t' << std::setprecision(8) << w(k);
    out << '\n';
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto trace = model.predict(ckpt.params, inputs[i], ckpt.variant);
    out << i << "\ttokens";
    for (const auto& t : data[i].tokens) out << '\t' << t;
    out << '\n';
    out << i << "\tprobabilities\t" << std::setprecision(8) << trace.probabilities(0) << '\t'
        << trace.probabilities(1) << '\n';
    if (trace.word_attention) row(i, "word_attention", *trace.word_attention);
    if (trace.matching)
      for (std::size_t w = 0; w < trace.matching->size(); ++w)
        row(i, ("matching:" + std::to_string(w)).c_str(), (*trace.matching)[w]);
    if (trace.sememe_attention) row(i, "sememe_attention", *trace.sememe_attention);
  }
}

struct EvalFlags {
  std::string checkpoint, data, lexicon, dump;
  unsigned threads = 1;
};

int cmd_eval(const CLI::App* sub, const Common& c, const EvalFlags& f) {
  auto m = start_manifest(sub, c);
  for (const auto& p : {f.checkpoint, f.data, f.lexicon}) {
    require_file(p);
    m.add_input(p);
  }
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const auto lexicon = lexicon_for(ckpt, f.lexicon);
  const Dataset data = load_dataset(f.data);
  if (data.empty()) throw UsageError("dataset " + f.data + " is empty");
  for (const auto& ex : data)
    if (ex.tokens.size() > ckpt.config.max_length)
      throw UsageError("sentence of length " + std::to_string(ex.tokens.size()) + " exceeds the model maximum " +
                       std::to_string(ckpt.config.max_length));
  const SwmModel model(ckpt.config);
  const auto inputs = encode_all(data, ckpt.word_vocab, lexicon);
  const double acc = evaluate(model, ckpt.params, inputs, data, ckpt.variant, f.threads);
  if (!f.dump.empty()) {
    const auto parent = fs::path(f.dump).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(f.dump, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + f.dump);
    dump_attention(out, data, inputs, model, ckpt);
    m.outputs.push_back(f.dump);
  }
  std::cout << "variant " << variant_name(ckpt.variant) << "\naccuracy " << fixed(acc) << '\n';
  finish(m, c);
  return 0;
}

int cmd_ablate(const CLI::App* sub, const Common& c, ModelFlags f, const std::string& variants) {
  auto m = start_manifest(sub, c);
  std::vector<Variant> chosen;
  for (auto name : text::split(variants, ',')) {
    const auto v = variant_or_usage(std::string(text::trim(name)));
    if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) chosen.push_back(v);
  }
  const auto base = load_training_lexicon(f, m);
  const auto train_set = load_split(f.data, "train", m);
  const auto valid_set = load_split(f.data, "valid", m);
  const auto test_set = load_split(f.data, "test", m);
  try {
    f.model.validate();
    f.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  f.train.seed = c.seed;

  struct Row {
    Variant v;
    double valid, test;
  };
  std::vector<Row> rows;
  for (Variant v : chosen) {
    f.train.variant = v;
    std::cerr << "training " << variant_name(v) << std::endl;
    auto result = train(f.model, train_set, valid_set, base, f.train);
    const auto lexicon = lexicon_for(result.best, base);
    rows.push_back({v, result.best_valid_accuracy, evaluate_checkpoint(result.best, lexicon, test_set, f.train.eval_threads)});
  }
  std::optional<double> full;
  for (const auto& r : rows)
    if (r.v == Variant::kFull) full = r.test;

  fs::create_directories(c.out);
  std::ofstream table(out_path(c, "ablation.tsv"), std::ios::binary);
  table << "variant\tvalid_accuracy\ttest_accuracy\tdelta_vs_full\n";
  for (const auto& r : rows) {
    const std::string delta = full ? fixed(r.test - *full) : "NA";
    table << variant_name(r.v) << '\t' << fixed(r.valid) << '\t' << fixed(r.test) << '\t' << delta << '\n';
    std::cout << std::left << std::setw(12) << variant_name(r.v) << " test " << fixed(r.test) << "  delta " << delta
              << '\n';
  }
  table.close();
  m.outputs.push_back(out_path(c, "ablation.tsv"));
  finish(m, c);
  return 0;
}

struct KnFlags {
  std::string data;
  std::size_t order = 5;
};

int cmd_baseline_kn(const CLI::App* sub, const Common& c, const KnFlags& f) {
  auto m = start_manifest(sub, c);
  if (f.order < 1) throw UsageError("--order must be >= 1");
  const auto train_set = load_split(f.data, "train", m);
  const auto valid_set = load_split(f.data, "valid", m);
  const auto test_set = load_split(f.data, "test", m);
  const auto pos = positives(train_set);
  if (pos.empty()) throw UsageError("training split has no positive sentences");

  const auto model = NGramModel::train(pos, f.order);
  auto score = [&](const Dataset& data, std::vector<double>& s, std::vector<int>& l) {
    for (const auto& ex : data) {
      s.push_back(model.average_logprob(ex.tokens));
      l.push_back(ex.label);
    }
  };
  std::vector<double> vs, ts;
  std::vector<int> vl, tl;
  score(valid_set, vs, vl);
  score(test_set, ts, tl);
  ThresholdClassifier clf;
  try {
    clf = fit_threshold(vs, vl);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const double acc = threshold_accuracy(ts, tl, clf.threshold);

  fs::create_directories(c.out);
  std::ofstream lm(out_path(c, "kn_model.txt"), std::ios::binary);
  model.save(lm);
  lm.close();
  std::ofstream report(out_path(c, "kn_report.tsv"), std::ios::binary);
  report << "order\tthreshold\tvalid_accuracy\ttest_accuracy\n"
         << f.order << '\t' << std::setprecision(10) << clf.threshold << '\t' << fixed(clf.validation_accuracy) << '\t'
         << fixed(acc) << '\n';
  report.close();
  m.outputs = {out_path(c, "kn_model.txt"), out_path(c, "kn_report.tsv")};
  std::cout << "order " << f.order << "\nthreshold " << std::setprecision(6) << clf.threshold
            << "\nvalid accuracy " << fixed(clf.validation_accuracy) << "\naccuracy " << fixed(acc) << '\n';
  finish(m, c);
  return 0;
}

struct GradFlags {
  std::string variants = "full,wo-match,wo-dual,wo-hownet,wo-wordpart,wo-cw";
  double tol = 1e-4;
  double step = 1e-5;
};

int cmd_grad_check(const CLI::App* sub, const Common& c, const GradFlags& f) {
  auto m = start_manifest(sub, c);
  bool ok = true;
  for (auto name : text::split(f.variants, ',')) {
    const Variant v = variant_or_usage(std::string(text::trim(name)));
    const auto report = check_variant_gradients(v, c.seed, f.step, f.tol);
    std::cout << std::left << std::setw(12) << variant_name(v) << " max_rel_error " << std::scientific
              << std::setprecision(3) << report.max_rel_error << std::defaultfloat
              << (report.passed ? "  ok" : "  FAILED") << '\n';
    for (const auto& e : report.entries)
      if (!e.passed) std::cout << "    " << e.name << " rel " << e.max_rel_error << '\n';
    ok = ok && report.passed;
  }
  finish(m, c);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sememe-word matching network for sentence rationality"};
  app.require_subcommand(1);
  Common common;
  common.argv.assign(argv, argv + argc);

  GenDataFlags gd;
  auto* gen_data = app.add_subcommand("gen-data", "Build labeled splits from a POS-tagged corpus");
  add_common(gen_data, common);
  gen_data->add_option("--corpus", gd.corpus, "surface_TAG corpus, one sentence per line")->required();
  gen_data->add_option("--mode", gd.mode, "replace1|replace2|swap-same-pos|swap-random|mixed|lm-gen|datasetN")
      ->capture_default_str();
  gen_data->add_option("--min-length", gd.min_length, "Sentences must be longer than this")->capture_default_str();
  gen_data->add_option("--ratios", gd.ratios, "train valid test fractions")->expected(3)->capture_default_str();
  gen_data->add_option("--max-positives", gd.max_positives, "Per-split source caps")->expected(3);
  gen_data->add_option("--punct-tags", gd.punctuation, "Tags treated as punctuation");
  gen_data->add_option("--lm-order", gd.lm_order, "n-gram order for lm-gen")->capture_default_str();

  GenSynthFlags gs;
  auto* gen_synth = app.add_subcommand("gen-synth", "Generate the synthetic selectional-restriction task");
  add_common(gen_synth, common);
  gen_synth->add_option("--train", gs.train, "Training positives")->capture_default_str();
  gen_synth->add_option("--valid", gs.valid, "Validation positives")->capture_default_str();
  gen_synth->add_option("--test", gs.test, "Test positives")->capture_default_str();
  gen_synth->add_option("--held-out", gs.held_out, "Fraction of nouns kept out of training")->capture_default_str();

  ModelFlags tf;
  std::string variant = "full";
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  add_common(train_cmd, common);
  add_model_flags(train_cmd, tf);
  train_cmd->add_option("--variant", variant, variant_list())->capture_default_str();
  train_cmd->add_flag("--quiet", quiet, "No progress lines");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset");
  add_common(eval, common);
  eval->add_option("--checkpoint", ef.checkpoint)->required();
  eval->add_option("--data", ef.data, "Dataset TSV")->required();
  eval->add_option("--lexicon", ef.lexicon)->required();
  eval->add_option("--dump-attention", ef.dump, "Write attention and matching weights here");
  eval->add_option("--threads", ef.threads)->capture_default_str();

  ModelFlags af;
  std::string variants = "full,wo-match,wo-dual,wo-hownet,wo-wordpart,wo-cw";
  auto* ablate = app.add_subcommand("ablate", "Train variants on shared data and compare test accuracy");
  add_common(ablate, common);
  add_model_flags(ablate, af);
  ablate->add_option("--variants", variants, "Comma-separated variants")->capture_default_str();

  KnFlags kf;
  auto* kn = app.add_subcommand("baseline-kn", "Kneser-Ney threshold baseline");
  add_common(kn, common);
  kn->add_option("--data", kf.data, "Directory with train/valid/test.tsv")->required();
  kn->add_option("--order", kf.order)->capture_default_str();

  GradFlags gf;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient check on tiny random models");
  add_common(grad, common);
  grad->add_option("--variants", gf.variants)->capture_default_str();
  grad->add_option("--tol", gf.tol)->capture_default_str();
  grad->add_option("--step", gf.step)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) resolve_settings(sub, common);
    if (*gen_data) return cmd_gen_data(gen_data, common, gd);
    if (*gen_synth) return cmd_gen_synth(gen_synth, common, gs);
    if (*train_cmd) return cmd_train(train_cmd, common, tf, variant, quiet);
    if (*eval) return cmd_eval(eval, common, ef);
    if (*ablate) return cmd_ablate(ablate, common, af, variants);
    if (*kn) return cmd_baseline_kn(kn, common, kf);
    if (*grad) return cmd_grad_check(grad, common, gf);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
