#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kiru/corpus.hpp"
#include "kiru/features.hpp"
#include "kiru/nn.hpp"

namespace kiru {

enum class Arch : std::uint8_t { kFFNN, kRNN, kLSTM };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);

// Defaults: window 5, 100-dim character
// embeddings, 10-dim character-type embeddings, 150 hidden units, BIES,
// learning rate 0.1 and L2 coefficient 1e-4.
struct ModelConfig {
  Arch arch = Arch::kLSTM;
  bool use_ctype = false;
  std::vector<int> ngram_orders{1};  // subset of {1, 2, 3}
  bool use_dict = false;
  std::size_t window = 5;
  std::size_t char_dim = 100;
  std::size_t ctype_dim = 10;
  std::size_t hidden = 150;
  LabelScheme scheme = LabelScheme::kBIES;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::size_t dict_max_len = SegDictionary::kDefaultMaxLen;
  std::uint64_t seed = 1;

  // Width of x_t: window * (|orders| * char_dim + [ctype] |orders| * ctype_dim).
  std::size_t input_width() const;
  // Width of the vector fed to W1: hidden for RNN/LSTM, input_width for FFNN.
  std::size_t recurrent_width() const;
  std::size_t dict_width() const;
  std::size_t output_width() const { return label_count(scheme); }
  bool has_order(int n) const;

  // Throws ConfigError. Normalizes ngram_orders to sorted unique.
  void validate();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// All learnable parameters. Embedding tables exist only for enabled streams
// and orders; index k holds order k + 1. The recurrent block is empty for
// FFNN. w2 has hidden + dict_width columns.
template <typename T>
struct Weights {
  std::array<nn::Tensor<T>, kMaxOrder> char_emb;
  std::array<nn::Tensor<T>, kMaxOrder> type_emb;
  nn::RecurrentParams<T> rec;
  nn::Tensor<T> w1, b1, w2, b2;

  // Visits non-empty tensors in a fixed order as f(name, tensor).
  template <class F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  std::vector<nn::ParamRef<T>> refs() {
    std::vector<nn::ParamRef<T>> out;
    for_each([&](const std::string& name, nn::Tensor<T>& t) {
      out.push_back({name, &t});
    });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const nn::Tensor<T>& t) { n += t.size(); });
    return n;
  }

  // Same shapes, all zero.
  Weights zeros_like() const {
    Weights out = *this;
    out.for_each([](const std::string&, nn::Tensor<T>& t) { t.fill(T(0)); });
    return out;
  }

  template <typename U>
  Weights<U> cast() const {
    Weights<U> out;
    for (std::size_t k = 0; k < kMaxOrder; ++k) {
      out.char_emb[k] = char_emb[k].template cast<U>();
      out.type_emb[k] = type_emb[k].template cast<U>();
    }
    out.rec.wx = rec.wx.template cast<U>();
    out.rec.wh = rec.wh.template cast<U>();
    out.rec.b = rec.b.template cast<U>();
    out.w1 = w1.template cast<U>();
    out.b1 = b1.template cast<U>();
    out.w2 = w2.template cast<U>();
    out.b2 = b2.template cast<U>();
    return out;
  }

  friend bool operator==(const Weights& a, const Weights& b) {
    return a.char_emb == b.char_emb && a.type_emb == b.type_emb &&
           a.rec.wx == b.rec.wx && a.rec.wh == b.rec.wh &&
           a.rec.b == b.rec.b && a.w1 == b.w1 && a.b1 == b.b1 &&
           a.w2 == b.w2 && a.b2 == b.b2;
  }

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& f) {
    static constexpr const char* kOrderNames[] = {"uni", "bi", "tri"};
    auto visit = [&](const std::string& name, auto& t) {
      if (!t.empty()) f(name, t);
    };
    for (std::size_t k = 0; k < kMaxOrder; ++k) {
      visit(std::string("char_emb.") + kOrderNames[k], self.char_emb[k]);
    }
    for (std::size_t k = 0; k < kMaxOrder; ++k) {
      visit(std::string("type_emb.") + kOrderNames[k], self.type_emb[k]);
    }
    visit("rec.wx", self.rec.wx);
    visit("rec.wh", self.rec.wh);
    visit("rec.b", self.rec.b);
    visit("w1", self.w1);
    visit("b1", self.b1);
    visit("w2", self.w2);
    visit("b2", self.b2);
  }
};

// Allocates zero tensors with the shapes implied by config and vocabulary.
template <typename T>
Weights<T> make_weights(const ModelConfig& config, const Vocabulary& vocab);

// Model inputs for one sentence; independent of the parameters.
struct SentenceInput {
  std::vector<NgramIds> ids;
  std::vector<DictVector> dict;  // empty unless the model uses the dictionary

  std::size_t size() const { return ids.size(); }
};

// Runs the network over one sentence. When `gold` is given, returns the summed
// cross-entropy (no L2 term); when `grad` is also given, accumulates the
// gradient of that loss into it. `probs`, if given, receives one column of
// label probabilities per position.
template <typename T>
double run_network(const ModelConfig& config, const Weights<T>& weights,
                   const SentenceInput& input, const LabelSequence* gold,
                   Weights<T>* grad, nn::Matrix<T>* probs,
                   nn::LossDiagnostics* diag = nullptr);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // summed over batches, L2 term included
  std::optional<double> dev_f1;
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::optional<std::size_t> best_epoch;  // set when a dev corpus was given
};

struct TrainOptions {
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochLog&)> on_epoch;
};

class SegmenterModel {
 public:
  // Random initialization from config.seed: weights and embeddings
  // uniform(-0.08, 0.08), biases zero, LSTM forget-gate bias 1.
  SegmenterModel(ModelConfig config, Vocabulary vocab,
                 std::optional<SegDictionary> dict = std::nullopt);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const std::optional<SegDictionary>& dictionary() const { return dict_; }
  const Weights<float>& weights() const { return weights_; }
  Weights<float>& mutable_weights() { return weights_; }
  const Weights<float>& adagrad_accumulators() const { return accum_; }

  SentenceInput prepare(const Sentence& sentence) const;

  // One probability vector of label_count(scheme) entries per character.
  std::vector<std::vector<float>> forward(const Sentence& sentence) const;

  struct Gradients {
    double loss = 0;  // cross-entropy plus (l2 / 2) ||theta||^2
    Weights<float> grad;
  };
  Gradients backward(const Sentence& sentence, const LabelSequence& gold) const;

  // Shuffled minibatch AdaGrad. With a dev corpus the best-dev-F1 snapshot is
  // kept; otherwise the final parameters are.
  TrainLog train(const std::vector<Sentence>& corpus,
                 const std::vector<Sentence>* dev = nullptr,
                 const TrainOptions& options = {});

  void save(const std::filesystem::path& path) const;
  static SegmenterModel load(const std::filesystem::path& path);

  void save(std::ostream& out) const;
  static SegmenterModel load_bytes(std::string_view bytes);

 private:
  SegmenterModel() = default;
  void check_vocabulary() const;

  ModelConfig config_;
  Vocabulary vocab_;
  std::optional<SegDictionary> dict_;
  Weights<float> weights_;
  Weights<float> accum_;
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

// Checks the analytic gradient of the full objective (cross-entropy over the
// sentence plus the L2 term) against central differences, in double
// precision, over every parameter of `model`.
nn::GradCheckReport check_model_gradients(const SegmenterModel& model,
                                          const Sentence& sentence,
                                          double eps = 1e-4,
                                          double tolerance = 1e-4);

// A model over a small built-in corpus, for gradient checks. Dimensions come
// from `config` as given.
SegmenterModel make_check_model(const ModelConfig& config);

// Three-character sentence used by make_check_model's callers.
Sentence check_sentence();

}  // namespace kiru
