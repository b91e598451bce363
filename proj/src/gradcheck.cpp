#include "kiru/corpus.hpp"
#include "kiru/model.hpp"

namespace kiru {

namespace {

double half_squared_norm(const Weights<double>& w) {
  double sq = 0;
  w.for_each([&](const std::string&, const nn::Tensor<double>& t) {
    for (double v : t.values()) sq += v * v;
  });
  return 0.5 * sq;
}

}  // namespace

nn::GradCheckReport check_model_gradients(const SegmenterModel& model,
                                          const Sentence& sentence,
                                          double eps, double tolerance) {
  if (!(eps > 0)) throw PreconditionError("grad_check: epsilon must be > 0");
  const ModelConfig& config = model.config();
  const SentenceInput input = model.prepare(sentence);
  const LabelSequence gold = encode_labels(sentence, config.scheme);

  Weights<double> params = model.weights().cast<double>();
  Weights<double> grad = params.zeros_like();
  run_network<double>(config, params, input, &gold, &grad, nullptr);
  {
    auto p = params.refs();
    auto g = grad.refs();
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto pv = p[k].tensor->values();
      auto gv = g[k].tensor->values();
      for (std::size_t i = 0; i < pv.size(); ++i) gv[i] += config.l2 * pv[i];
    }
  }
  auto loss = [&] {
    return run_network<double>(config, params, input, &gold, nullptr, nullptr) +
           config.l2 * half_squared_norm(params);
  };
  const auto param_refs = params.refs();
  const auto grad_refs = grad.refs();
  return nn::grad_check(param_refs, grad_refs, loss, eps, tolerance);
}

Sentence check_sentence() {
  return parse_segmented_line("ため 池", 1);
}

SegmenterModel make_check_model(const ModelConfig& config) {
  std::vector<Sentence> corpus = {
      parse_segmented_line("ため池 の 絵", 1),
      parse_segmented_line("ため 池 は 7 つ", 2),
      parse_segmented_line("エルマー と りゅう", 3),
  };
  std::optional<SegDictionary> dict;
  if (config.use_dict) {
    dict = build_dictionary({&corpus}, false, config.dict_max_len);
  }
  return SegmenterModel(config, build_vocabulary(corpus), std::move(dict));
}

}  // namespace kiru
