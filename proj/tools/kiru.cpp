// kiru: train, apply and evaluate character-based word segmenters.
//
// Exit codes: 0 success, 1 failed gradient check, 2 bad configuration or
// unreadable input, 3 non-finite loss during training.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kiru/corpus.hpp"
#include "kiru/decode.hpp"
#include "kiru/error.hpp"
#include "kiru/eval.hpp"
#include "kiru/model.hpp"
#include "kiru/unicode.hpp"

namespace fs = std::filesystem;
using namespace kiru;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitTraining = 3;

// String-typed mirrors of ModelConfig fields that need parsing.
struct ModelFlags {
  std::string arch = "lstm";
  std::string scheme = "bies";
  std::vector<int> ngram;
};

void add_model_flags(CLI::App* app, ModelConfig& config, ModelFlags& flags) {
  app->add_option("--arch", flags.arch, "ffnn, rnn or lstm")
      ->capture_default_str();
  app->add_option("--scheme", flags.scheme, "bies, bie or bi")
      ->capture_default_str();
  app->add_option("--window", config.window, "window size (odd)")
      ->capture_default_str();
  app->add_option("--char-dim", config.char_dim)->capture_default_str();
  app->add_option("--ctype-dim", config.ctype_dim)->capture_default_str();
  app->add_option("--hidden", config.hidden)->capture_default_str();
  app->add_option("--lr", config.learning_rate)->capture_default_str();
  app->add_option("--l2", config.l2)->capture_default_str();
  app->add_option("--batch", config.batch_size)->capture_default_str();
  app->add_option("--epochs", config.epochs)->capture_default_str();
  app->add_option("--seed", config.seed)->capture_default_str();
  app->add_option("--dict-max-len", config.dict_max_len)->capture_default_str();
  app->add_flag("--ctype", config.use_ctype, "character-type embeddings");
  app->add_option("--ngram", flags.ngram, "n-gram orders, e.g. 1,2,3")
      ->delimiter(',');
}

void finish_config(ModelConfig& config, const ModelFlags& flags) {
  config.arch = parse_arch(flags.arch);
  config.scheme = parse_scheme(flags.scheme);
  if (!flags.ngram.empty()) config.ngram_orders = flags.ngram;
  config.validate();
}

std::vector<Sentence> read_corpus(const fs::path& path) {
  if (fs::is_directory(path)) return read_domain_corpus(path);
  return read_segmented_corpus(path);
}

// Reads INI/TOML config files; keys outside any section apply to whichever
// subcommand was selected on the command line.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App& app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigINI::from_config(in);
    const auto selected = app_.get_subcommands();
    if (selected.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty()) item.parents = {selected.front()->get_name()};
    }
    return items;
  }

 private:
  const CLI::App& app_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ModelConfig config;
  ModelFlags flags;
  std::string train;
  std::string dev;
  std::string test;
  std::string dict;
  std::string out;
  std::string log;
  bool keep_singletons = false;
};

// Dictionary sources are the keywords train, dev and test (segmented corpora,
// singletons pruned) or paths to word lists.
SegDictionary build_dict_from_sources(const TrainArgs& a,
                                      const std::vector<Sentence>& train,
                                      const std::vector<Sentence>& dev,
                                      const std::vector<Sentence>& test) {
  std::vector<const std::vector<Sentence>*> corpora;
  std::vector<std::string> lists;
  for (const auto& src : split_list(a.dict)) {
    if (src == "train") {
      corpora.push_back(&train);
    } else if (src == "dev") {
      if (a.dev.empty()) throw ConfigError("--dict dev requires --dev");
      corpora.push_back(&dev);
    } else if (src == "test") {
      if (a.test.empty()) throw ConfigError("--dict test requires --test");
      corpora.push_back(&test);
    } else {
      lists.push_back(src);
    }
  }
  SegDictionary dict =
      build_dictionary(corpora, !a.keep_singletons, a.config.dict_max_len);
  for (const auto& path : lists) {
    for (const auto& w : read_dictionary(path, a.config.dict_max_len).words()) {
      dict.insert(w);
    }
  }
  return dict;
}

int run_train(TrainArgs& a) {
  if (!a.dict.empty()) a.config.use_dict = true;
  finish_config(a.config, a.flags);
  const auto train = read_corpus(a.train);
  const auto dev = a.dev.empty() ? std::vector<Sentence>{} : read_corpus(a.dev);
  const auto test = a.test.empty() ? std::vector<Sentence>{} : read_corpus(a.test);

  std::optional<SegDictionary> dict;
  if (a.config.use_dict) dict = build_dict_from_sources(a, train, dev, test);

  SegmenterModel model(a.config, build_vocabulary(train), std::move(dict));
  std::cerr << "model: " << arch_name(a.config.arch) << ", "
            << model.weights().parameter_count() << " parameters, "
            << train.size() << " training sentences";
  if (model.dictionary()) std::cerr << ", " << model.dictionary()->size() << " dictionary words";
  std::cerr << '\n';

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path);
  if (!log) throw Error("cannot write log '" + log_path + "'");
  log << "epoch\tloss\tdev_f1\tseconds\n";

  TrainOptions options;
  options.on_epoch = [&](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.4f", e.epoch, e.loss);
    std::cerr << buf;
    if (e.dev_f1) {
      std::snprintf(buf, sizeof buf, " dev_f1 %.4f", *e.dev_f1);
      std::cerr << buf;
    }
    std::snprintf(buf, sizeof buf, " (%.1fs)\n", e.seconds);
    std::cerr << buf;
    log << e.epoch << '\t' << e.loss << '\t'
        << (e.dev_f1 ? std::to_string(*e.dev_f1) : "-") << '\t' << e.seconds
        << '\n';
    return true;
  };
  const TrainLog result = model.train(train, dev.empty() ? nullptr : &dev, options);
  if (result.best_epoch) std::cerr << "best epoch " << *result.best_epoch << '\n';
  model.save(a.out);
  std::cerr << "wrote " << a.out << '\n';

  if (!test.empty()) {
    const auto pred = segment_corpus(model, test, thread_limit());
    std::cerr << "test f1 " << corpus_counts(test, pred).f1() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// segment

int run_segment(const std::string& model_path, const std::string& input) {
  const SegmenterModel model = SegmenterModel::load(model_path);
  if (input.empty() || input == "-") {
    segment_stream(model, std::cin, std::cout, thread_limit());
  } else {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw Error("cannot open input '" + input + "'");
    segment_stream(model, in, std::cout, thread_limit());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model;
  std::string pred;
  std::string gold;
  bool by_domain = false;
  bool json = false;
};

int run_eval(const EvalArgs& a) {
  const auto gold = read_corpus(a.gold);
  std::vector<Sentence> pred;
  if (!a.pred.empty()) {
    pred = read_corpus(a.pred);
    if (pred.size() != gold.size()) {
      throw PreconditionError("prediction has " + std::to_string(pred.size()) +
                              " sentences, gold has " + std::to_string(gold.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i].domain = gold[i].domain;
  } else {
    pred = segment_corpus(SegmenterModel::load(a.model), gold, thread_limit());
  }
  if (a.by_domain) {
    const DomainReport report = domain_report(gold, pred);
    std::cout << (a.json ? report.to_json() + "\n" : report.to_text());
  } else {
    std::cout << format_summary(summarize(gold, pred));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// dict-build

int run_dict_build(const std::vector<std::string>& inputs, const std::string& out,
                   bool keep_singletons) {
  std::vector<std::vector<Sentence>> corpora;
  for (const auto& path : inputs) corpora.push_back(read_corpus(path));
  std::vector<const std::vector<Sentence>*> refs;
  for (const auto& c : corpora) refs.push_back(&c);
  const SegDictionary dict = build_dictionary(refs, !keep_singletons);
  if (out.empty() || out == "-") {
    write_dictionary(std::cout, dict);
  } else {
    std::ofstream f(out);
    if (!f) throw Error("cannot write dictionary '" + out + "'");
    write_dictionary(f, dict);
  }
  std::cerr << dict.size() << " words\n";
  return 0;
}

// ---------------------------------------------------------------------------
// grad-check

int run_grad_check(ModelConfig& config, const ModelFlags& flags, double eps,
                   double tolerance, bool use_dict) {
  config.use_dict = use_dict;
  finish_config(config, flags);
  const SegmenterModel model = make_check_model(config);
  const std::size_t params = model.weights().parameter_count();
  const auto report = check_model_gradients(model, check_sentence(), eps, tolerance);
  std::cout << "parameters=" << params << '\n'
            << "checked=" << report.checked << '\n'
            << "max_rel_error=" << report.max_rel_error << '\n'
            << "worst=" << report.worst.param << '[' << report.worst.index << "]\n"
            << "failures=" << report.failures.size() << '\n'
            << "status=" << (report.passed() ? "PASS" : "FAIL") << '\n';
  return report.passed() ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// inspect

int run_inspect(const std::string& path) {
  const SegmenterModel model = SegmenterModel::load(path);
  const ModelConfig& c = model.config();
  std::cout << "arch=" << arch_name(c.arch) << '\n'
            << "scheme=" << scheme_name(c.scheme) << '\n'
            << "window=" << c.window << '\n'
            << "char_dim=" << c.char_dim << '\n'
            << "ctype=" << (c.use_ctype ? "on" : "off") << '\n'
            << "ctype_dim=" << c.ctype_dim << '\n'
            << "hidden=" << c.hidden << '\n'
            << "ngram=";
  for (std::size_t i = 0; i < c.ngram_orders.size(); ++i) {
    std::cout << (i ? "," : "") << c.ngram_orders[i];
  }
  std::cout << '\n'
            << "dict=" << (c.use_dict ? "on" : "off") << '\n'
            << "lr=" << c.learning_rate << '\n'
            << "l2=" << c.l2 << '\n'
            << "batch=" << c.batch_size << '\n'
            << "epochs=" << c.epochs << '\n'
            << "seed=" << c.seed << '\n';
  const Vocabulary& v = model.vocabulary();
  static constexpr const char* kOrder[] = {"uni", "bi", "tri"};
  for (int n = 1; n <= kMaxOrder; ++n) {
    std::cout << "vocab.char." << kOrder[n - 1] << '=' << v.size(Stream::kChar, n) << '\n';
  }
  for (int n = 1; n <= kMaxOrder; ++n) {
    std::cout << "vocab.ctype." << kOrder[n - 1] << '='
              << v.size(Stream::kCharType, n) << '\n';
  }
  if (model.dictionary()) {
    std::cout << "dict.words=" << model.dictionary()->size() << '\n'
              << "dict.max_len=" << model.dictionary()->max_len() << '\n';
  }
  model.weights().for_each([](const std::string& name, const nn::Tensor<float>& t) {
    std::cout << "tensor." << name << '=' << t.rows() << 'x' << t.cols() << '\n';
  });
  std::cout << "parameters=" << model.weights().parameter_count() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character-based neural word segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<SubcommandConfig>(app));
  app.set_config("--config", "", "INI/TOML file with option defaults for train or grad-check");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--train", train.train, "segmented corpus (file or domain directory)")
      ->required();
  train_cmd->add_option("--dev", train.dev, "development corpus for model selection");
  train_cmd->add_option("--test", train.test, "test corpus (reported, and usable by --dict)");
  train_cmd->add_option("--dict", train.dict,
                        "dictionary sources: train, dev, test or word-list paths");
  train_cmd->add_flag("--keep-singletons", train.keep_singletons,
                      "do not prune words seen once when building the dictionary");
  train_cmd->add_option("-o,--out", train.out, "model file")->required();
  train_cmd->add_option("--log", train.log, "epoch log (default: <out>.log)");
  add_model_flags(train_cmd, train.config, train.flags);

  std::string seg_model;
  std::string seg_input;
  auto* seg_cmd = app.add_subcommand("segment", "segment raw text, one sentence per line");
  seg_cmd->add_option("-m,--model", seg_model)->required();
  seg_cmd->add_option("input", seg_input, "input file (default: stdin)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score a model or a prediction file");
  eval_cmd->add_option("--gold", eval.gold, "gold corpus (file or domain directory)")
      ->required();
  auto* model_opt = eval_cmd->add_option("-m,--model", eval.model);
  auto* pred_opt = eval_cmd->add_option("--pred", eval.pred, "segmented predictions");
  model_opt->excludes(pred_opt);
  eval_cmd->add_flag("--by-domain", eval.by_domain, "per-domain table");
  eval_cmd->add_flag("--json", eval.json, "machine-readable per-domain report");

  std::vector<std::string> dict_inputs;
  std::string dict_out;
  bool dict_keep = false;
  auto* dict_cmd = app.add_subcommand("dict-build", "build a dictionary from segmented corpora");
  dict_cmd->add_option("corpora", dict_inputs)->required();
  dict_cmd->add_option("-o,--out", dict_out, "output file (default: stdout)");
  dict_cmd->add_flag("--keep-singletons", dict_keep);

  ModelConfig gc;
  gc.window = 3;
  gc.char_dim = 4;
  gc.ctype_dim = 3;
  gc.hidden = 5;
  ModelFlags gc_flags;
  double eps = 1e-4;
  double tolerance = 1e-4;
  bool gc_dict = false;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of a tiny model");
  add_model_flags(gc_cmd, gc, gc_flags);
  gc_cmd->add_flag("--dict", gc_dict, "include dictionary features");
  gc_cmd->add_option("--eps", eps)->capture_default_str();
  gc_cmd->add_option("--tol", tolerance)->capture_default_str();

  std::string inspect_model;
  auto* inspect_cmd = app.add_subcommand("inspect", "print a model's configuration and shapes");
  inspect_cmd->add_option("model", inspect_model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*seg_cmd) return run_segment(seg_model, seg_input);
    if (*eval_cmd) {
      if (eval.model.empty() && eval.pred.empty()) {
        throw ConfigError("eval needs --model or --pred");
      }
      return run_eval(eval);
    }
    if (*dict_cmd) return run_dict_build(dict_inputs, dict_out, dict_keep);
    if (*gc_cmd) return run_grad_check(gc, gc_flags, eps, tolerance, gc_dict);
    if (*inspect_cmd) return run_inspect(inspect_model);
  } catch (const TrainingError& e) {
    std::cerr << "kiru: " << e.what() << '\n';
    return kExitTraining;
  } catch (const std::exception& e) {
    std::cerr << "kiru: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
