#include "kiru/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "kiru/decode.hpp"
#include "kiru/error.hpp"
#include "kiru/eval.hpp"

namespace kiru {

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kFFNN: return "ffnn";
    case Arch::kRNN: return "rnn";
    case Arch::kLSTM: return "lstm";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "ffnn") return Arch::kFFNN;
  if (lower == "rnn") return Arch::kRNN;
  if (lower == "lstm") return Arch::kLSTM;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

bool ModelConfig::has_order(int n) const {
  return std::find(ngram_orders.begin(), ngram_orders.end(), n) !=
         ngram_orders.end();
}

std::size_t ModelConfig::input_width() const {
  const std::size_t per_position =
      ngram_orders.size() * (char_dim + (use_ctype ? ctype_dim : 0));
  return window * per_position;
}

std::size_t ModelConfig::recurrent_width() const {
  return arch == Arch::kFFNN ? input_width() : hidden;
}

std::size_t ModelConfig::dict_width() const {
  return use_dict ? DictVector::width(dict_max_len) : 0;
}

void ModelConfig::validate() {
  check_window(window);
  std::sort(ngram_orders.begin(), ngram_orders.end());
  ngram_orders.erase(std::unique(ngram_orders.begin(), ngram_orders.end()),
                     ngram_orders.end());
  if (ngram_orders.empty()) throw ConfigError("at least one n-gram order required");
  for (int n : ngram_orders) {
    if (n < 1 || n > kMaxOrder) {
      throw ConfigError("n-gram orders must be in 1..3, got " +
                        std::to_string(n));
    }
  }
  if (char_dim == 0) throw ConfigError("char_dim must be positive");
  if (use_ctype && ctype_dim == 0) throw ConfigError("ctype_dim must be positive");
  if (hidden == 0) throw ConfigError("hidden must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(l2 >= 0) || !std::isfinite(l2)) throw ConfigError("l2 must be >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (dict_max_len == 0) throw ConfigError("dict_max_len must be positive");
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
Weights<T> make_weights(const ModelConfig& config, const Vocabulary& vocab) {
  Weights<T> w;
  for (int n : config.ngram_orders) {
    const auto k = static_cast<std::size_t>(n - 1);
    w.char_emb[k] = nn::Tensor<T>(vocab.size(Stream::kChar, n), config.char_dim);
    if (config.use_ctype) {
      w.type_emb[k] =
          nn::Tensor<T>(vocab.size(Stream::kCharType, n), config.ctype_dim);
    }
  }
  const std::size_t h = config.hidden;
  if (config.arch != Arch::kFFNN) {
    const std::size_t gates = config.arch == Arch::kLSTM ? 4 : 1;
    w.rec.wx = nn::Tensor<T>(gates * h, config.input_width());
    w.rec.wh = nn::Tensor<T>(gates * h, h);
    w.rec.b = nn::Tensor<T>(gates * h, 1);
  }
  w.w1 = nn::Tensor<T>(h, config.recurrent_width());
  w.b1 = nn::Tensor<T>(h, 1);
  w.w2 = nn::Tensor<T>(config.output_width(), h + config.dict_width());
  w.b2 = nn::Tensor<T>(config.output_width(), 1);
  return w;
}

template <typename T>
double run_network(const ModelConfig& config, const Weights<T>& w,
                   const SentenceInput& input, const LabelSequence* gold,
                   Weights<T>* grad, nn::Matrix<T>* probs,
                   nn::LossDiagnostics* diag) {
  using Mat = nn::Matrix<T>;
  using Vec = nn::Vector<T>;
  const auto n = static_cast<Eigen::Index>(input.size());
  if (n == 0) throw PreconditionError("cannot run the network on an empty sentence");
  if (gold && gold->size() != input.size()) {
    throw PreconditionError("gold label count does not match sentence length");
  }
  if (config.use_dict && input.dict.size() != input.size()) {
    throw PreconditionError("missing dictionary features");
  }
  const auto hidden = static_cast<Eigen::Index>(config.hidden);
  std::vector<int> orders(config.ngram_orders.rbegin(),
                          config.ngram_orders.rend());

  // Lookup and concatenation: per window offset, character n-grams from the
  // highest order down, then character-type n-grams likewise.
  std::vector<PositionFeatures> windows;
  windows.reserve(input.size());
  for (std::size_t t = 0; t < input.size(); ++t) {
    windows.push_back(assemble_window(input.ids, t, config.window));
  }
  auto table_row = [](const nn::Tensor<T>& table, std::int32_t id) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw PreconditionError("feature id outside the model's vocabulary");
    }
    return table.row(static_cast<std::size_t>(id));
  };
  Mat x(static_cast<Eigen::Index>(config.input_width()), n);
  for (Eigen::Index t = 0; t < n; ++t) {
    T* col = x.col(t).data();
    for (const NgramIds& pos : windows[static_cast<std::size_t>(t)].window) {
      for (int o : orders) {
        auto r = table_row(w.char_emb[o - 1], pos.chars[o - 1]);
        col = std::copy(r.begin(), r.end(), col);
      }
      if (config.use_ctype) {
        for (int o : orders) {
          auto r = table_row(w.type_emb[o - 1], pos.types[o - 1]);
          col = std::copy(r.begin(), r.end(), col);
        }
      }
    }
  }

  // Recurrent block, left to right.
  Mat rec_out;
  Mat rec_pre;
  std::vector<nn::LstmCache<T>> cells;
  const Vec zero_state = Vec::Zero(hidden);
  if (config.arch != Arch::kFFNN) {
    rec_pre = w.rec.wx.mat() * x;
    rec_pre.colwise() += w.rec.b.vec();
    rec_out.resize(hidden, n);
    if (config.arch == Arch::kLSTM) cells.resize(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) {
      Vec z = rec_pre.col(t);
      if (t > 0) z.noalias() += w.rec.wh.mat() * rec_out.col(t - 1);
      if (config.arch == Arch::kRNN) {
        rec_out.col(t) = z.array().tanh().matrix();
      } else {
        const auto ti = static_cast<std::size_t>(t);
        if (t > 0) {
          nn::lstm_cell<T>(z, cells[ti - 1].c, cells[ti]);
        } else {
          nn::lstm_cell<T>(z, zero_state, cells[ti]);
        }
        rec_out.col(t) = cells[ti].h;
      }
    }
  }
  const Mat& r = config.arch == Arch::kFFNN ? x : rec_out;

  Mat h = w.w1.mat() * r;
  h.colwise() += w.b1.vec();
  h = h.array().tanh().matrix();

  // h'_t = h_t (+) d_t
  Mat h_ext;
  if (config.use_dict) {
    const auto dw = static_cast<Eigen::Index>(config.dict_width());
    h_ext.resize(hidden + dw, n);
    h_ext.topRows(hidden) = h;
    for (Eigen::Index t = 0; t < n; ++t) {
      const DictVector& d = input.dict[static_cast<std::size_t>(t)];
      if (static_cast<Eigen::Index>(d.size()) != dw) {
        throw PreconditionError("dictionary vector width mismatch");
      }
      for (Eigen::Index k = 0; k < dw; ++k) {
        h_ext(hidden + k, t) = T(d[static_cast<std::size_t>(k)]);
      }
    }
  }
  const Mat& top = config.use_dict ? h_ext : h;

  Mat y = w.w2.mat() * top;
  y.colwise() += w.b2.vec();
  for (Eigen::Index t = 0; t < n; ++t) {
    auto col = y.col(t);
    nn::softmax_inplace(col);
  }
  if (probs) *probs = y;
  if (!gold) return 0.0;

  double loss = 0;
  std::vector<Eigen::Index> gold_idx(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto g = static_cast<Eigen::Index>((*gold)[static_cast<std::size_t>(t)]);
    if (g >= y.rows()) {
      throw PreconditionError("gold label not in the model's label scheme");
    }
    gold_idx[static_cast<std::size_t>(t)] = g;
    T p = y(g, t);
    if (p < T(nn::kProbabilityFloor)) {
      p = T(nn::kProbabilityFloor);
      if (diag) ++diag->clamped;
    }
    loss -= std::log(double(p));
  }
  if (!grad) return loss;

  // Softmax + cross-entropy: dL/dz = y - onehot(gold).
  Mat dy = y;
  for (Eigen::Index t = 0; t < n; ++t) dy(gold_idx[static_cast<std::size_t>(t)], t) -= T(1);
  grad->w2.mat().noalias() += dy * top.transpose();
  grad->b2.vec() += dy.rowwise().sum();
  Mat dh = w.w2.mat().leftCols(hidden).transpose() * dy;
  dh.array() *= (T(1) - h.array().square());
  grad->w1.mat().noalias() += dh * r.transpose();
  grad->b1.vec() += dh.rowwise().sum();
  Mat dr = w.w1.mat().transpose() * dh;

  Mat dx;
  if (config.arch == Arch::kFFNN) {
    dx = std::move(dr);
  } else {
    const Eigen::Index gates = config.arch == Arch::kLSTM ? 4 : 1;
    Mat dz_all(gates * hidden, n);
    Vec dh_next = Vec::Zero(hidden);
    Vec dc_next = Vec::Zero(hidden);
    Vec dz;
    Vec dc_prev;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
      const Vec dh_t = dr.col(t) + dh_next;
      if (config.arch == Arch::kRNN) {
        dz = dh_t.array() * (T(1) - rec_out.col(t).array().square());
      } else {
        const auto ti = static_cast<std::size_t>(t);
        if (t > 0) {
          nn::lstm_cell_backward<T>(cells[ti], cells[ti - 1].c, dh_t, dc_next,
                                    dz, dc_prev);
        } else {
          nn::lstm_cell_backward<T>(cells[ti], zero_state, dh_t, dc_next, dz,
                                    dc_prev);
        }
        dc_next = dc_prev;
      }
      dz_all.col(t) = dz;
      dh_next.noalias() = w.rec.wh.mat().transpose() * dz;
      if (t > 0) {
        grad->rec.wh.mat().noalias() += dz * rec_out.col(t - 1).transpose();
      }
    }
    grad->rec.wx.mat().noalias() += dz_all * x.transpose();
    grad->rec.b.vec() += dz_all.rowwise().sum();
    dx = w.rec.wx.mat().transpose() * dz_all;
  }

  // Scatter into embedding rows, mirroring the concatenation above.
  auto scatter = [](nn::Tensor<T>& table, std::int32_t id, const T*& src) {
    auto row = table.row(static_cast<std::size_t>(id));
    for (auto& v : row) v += *src++;
  };
  for (Eigen::Index t = 0; t < n; ++t) {
    const T* src = dx.col(t).data();
    for (const NgramIds& pos : windows[static_cast<std::size_t>(t)].window) {
      for (int o : orders) scatter(grad->char_emb[o - 1], pos.chars[o - 1], src);
      if (config.use_ctype) {
        for (int o : orders) scatter(grad->type_emb[o - 1], pos.types[o - 1], src);
      }
    }
  }
  return loss;
}

template Weights<float> make_weights<float>(const ModelConfig&, const Vocabulary&);
template Weights<double> make_weights<double>(const ModelConfig&, const Vocabulary&);
template double run_network<float>(const ModelConfig&, const Weights<float>&,
                                   const SentenceInput&, const LabelSequence*,
                                   Weights<float>*, nn::Matrix<float>*,
                                   nn::LossDiagnostics*);
template double run_network<double>(const ModelConfig&, const Weights<double>&,
                                    const SentenceInput&, const LabelSequence*,
                                    Weights<double>*, nn::Matrix<double>*,
                                    nn::LossDiagnostics*);

// ---------------------------------------------------------------------------
// SegmenterModel

SegmenterModel::SegmenterModel(ModelConfig config, Vocabulary vocab,
                               std::optional<SegDictionary> dict)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  if (config_.use_dict) {
    if (!dict) dict.emplace(config_.dict_max_len);
    config_.dict_max_len = dict->max_len();
    dict_ = std::move(dict);
  }
  weights_ = make_weights<float>(config_, vocab_);
  accum_ = weights_.zeros_like();

  std::mt19937_64 rng(config_.seed);
  std::uniform_real_distribution<float> uniform(-0.08f, 0.08f);
  const std::size_t h = config_.hidden;
  weights_.for_each([&](const std::string& name, nn::Tensor<float>& t) {
    const bool bias = name == "rec.b" || name == "b1" || name == "b2";
    if (bias) {
      t.fill(0.0f);
      if (name == "rec.b" && config_.arch == Arch::kLSTM) {
        for (std::size_t k = h; k < 2 * h; ++k) t(k, 0) = 1.0f;
      }
      return;
    }
    for (auto& v : t.values()) v = uniform(rng);
  });
}

void SegmenterModel::check_vocabulary() const {
  for (int n : config_.ngram_orders) {
    const auto k = static_cast<std::size_t>(n - 1);
    if (weights_.char_emb[k].rows() != vocab_.size(Stream::kChar, n) ||
        (config_.use_ctype &&
         weights_.type_emb[k].rows() != vocab_.size(Stream::kCharType, n))) {
      throw Error("vocabulary does not match model embedding tables");
    }
  }
}

SentenceInput SegmenterModel::prepare(const Sentence& sentence) const {
  SentenceInput in;
  in.ids = sentence_ngram_ids(sentence, vocab_);
  if (config_.use_dict) in.dict = dictionary_vectors(sentence, *dict_);
  return in;
}

std::vector<std::vector<float>> SegmenterModel::forward(
    const Sentence& sentence) const {
  if (sentence.chars.empty()) throw PreconditionError("forward: empty sentence");
  nn::Matrix<float> probs;
  run_network<float>(config_, weights_, prepare(sentence), nullptr, nullptr,
                     &probs);
  std::vector<std::vector<float>> out(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    out[static_cast<std::size_t>(t)].assign(probs.col(t).data(),
                                            probs.col(t).data() + probs.rows());
  }
  return out;
}

namespace {

// Adds lambda * theta to every gradient and returns (lambda / 2) ||theta||^2.
double add_l2(const Weights<float>& weights, Weights<float>& grad,
              double lambda) {
  if (lambda == 0) return 0;
  double sq = 0;
  std::vector<const nn::Tensor<float>*> params;
  weights.for_each([&](const std::string&, const nn::Tensor<float>& t) {
    params.push_back(&t);
  });
  std::size_t k = 0;
  const auto lam = static_cast<float>(lambda);
  grad.for_each([&](const std::string&, nn::Tensor<float>& g) {
    const auto theta = params[k++]->values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      sq += double(theta[i]) * double(theta[i]);
      gv[i] += lam * theta[i];
    }
  });
  return 0.5 * lambda * sq;
}

}  // namespace

SegmenterModel::Gradients SegmenterModel::backward(
    const Sentence& sentence, const LabelSequence& gold) const {
  if (gold.size() != sentence.size()) {
    throw PreconditionError("backward: gold length does not match sentence");
  }
  Gradients out;
  out.grad = weights_.zeros_like();
  out.loss = run_network<float>(config_, weights_, prepare(sentence), &gold,
                                &out.grad, nullptr);
  out.loss += add_l2(weights_, out.grad, config_.l2);
  return out;
}

TrainLog SegmenterModel::train(const std::vector<Sentence>& corpus,
                               const std::vector<Sentence>* dev,
                               const TrainOptions& options) {
  if (corpus.empty()) throw PreconditionError("train: empty corpus");
  check_vocabulary();
  std::vector<SentenceInput> inputs;
  std::vector<LabelSequence> golds;
  for (const Sentence& s : corpus) {
    if (s.chars.empty()) continue;
    inputs.push_back(prepare(s));
    golds.push_back(encode_labels(s, config_.scheme));
  }
  if (inputs.empty()) throw PreconditionError("train: corpus has no characters");

  std::mt19937_64 rng(config_.seed + 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  Weights<float> grad = weights_.zeros_like();
  auto weight_refs = weights_.refs();
  auto grad_refs = grad.refs();
  auto accum_refs = accum_.refs();
  const auto lr = static_cast<float>(config_.learning_rate);

  TrainLog log;
  std::optional<Weights<float>> best;
  double best_f1 = -1;
  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
      for (auto& g : grad_refs) g.tensor->fill(0.0f);
      double loss = 0;
      const std::size_t end = std::min(order.size(), b + config_.batch_size);
      for (std::size_t k = b; k < end; ++k) {
        loss += run_network<float>(config_, weights_, inputs[order[k]],
                                   &golds[order[k]], &grad, nullptr);
      }
      loss += add_l2(weights_, grad, config_.l2);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss in epoch " +
                            std::to_string(epoch));
      }
      for (std::size_t p = 0; p < weight_refs.size(); ++p) {
        nn::adagrad_update<float>(weight_refs[p].tensor->values(),
                                  grad_refs[p].tensor->values(),
                                  accum_refs[p].tensor->values(), lr,
                                  weight_refs[p].name);
      }
      epoch_loss += loss;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss;
    if (dev && !dev->empty()) {
      const auto pred = segment_corpus(*this, *dev, thread_limit());
      entry.dev_f1 = corpus_counts(*dev, pred).f1();
      if (*entry.dev_f1 > best_f1) {
        best_f1 = *entry.dev_f1;
        best = weights_;
        log.best_epoch = epoch;
      }
    }
    entry.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    log.epochs.push_back(entry);
    if (options.on_epoch && !options.on_epoch(entry)) break;
  }
  if (best) weights_ = std::move(*best);
  return log;
}

}  // namespace kiru
