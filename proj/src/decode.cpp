#include "kiru/decode.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <istream>
#include <ostream>
#include <thread>

#include "kiru/model.hpp"
#include "kiru/unicode.hpp"

namespace kiru {

LabelSequence predict_labels(const std::vector<std::vector<float>>& dists,
                             LabelScheme scheme) {
  const auto labels = scheme_labels(scheme);
  LabelSequence out;
  out.reserve(dists.size());
  for (const auto& y : dists) {
    if (y.size() != labels.size()) {
      throw PreconditionError("distribution size does not match label scheme");
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < y.size(); ++k) {
      if (y[k] > y[best]) best = k;
    }
    out.push_back(labels[best]);
  }
  return out;
}

std::vector<Span> labels_to_segmentation(const LabelSequence& labels,
                                         LabelScheme scheme) {
  std::vector<Span> spans;
  if (labels.empty()) return spans;
  auto opens = [scheme](Label l) {
    return l == Label::kB || (scheme != LabelScheme::kBI && l == Label::kS);
  };
  std::size_t begin = 0;
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (opens(labels[t])) {
      spans.push_back({begin, t});
      begin = t;
    }
  }
  spans.push_back({begin, labels.size()});
  return spans;
}

Sentence segment_chars(const SegmenterModel& model, std::u32string chars) {
  Sentence s;
  s.chars = std::move(chars);
  if (s.chars.empty()) {
    s.spans.emplace();
    return s;
  }
  const LabelScheme scheme = model.config().scheme;
  s.spans = labels_to_segmentation(predict_labels(model.forward(s), scheme),
                                   scheme);
  return s;
}

namespace {

// Raw input may already contain ASCII spaces; they are dropped from the
// character sequence and kept as forced word boundaries.
Sentence segment_raw(const SegmenterModel& model, const std::u32string& raw) {
  std::u32string chars;
  std::vector<std::size_t> forced;
  for (char32_t c : raw) {
    if (c == U' ') {
      if (!chars.empty()) forced.push_back(chars.size());
    } else {
      chars.push_back(c);
    }
  }
  Sentence s = segment_chars(model, std::move(chars));
  if (forced.empty() || s.chars.empty()) return s;
  std::vector<std::size_t> cuts;
  for (const Span& sp : *s.spans) cuts.push_back(sp.begin);
  for (std::size_t f : forced) {
    if (f < s.chars.size()) cuts.push_back(f);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Span> spans;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    spans.push_back({cuts[k], k + 1 < cuts.size() ? cuts[k + 1] : s.chars.size()});
  }
  s.spans = std::move(spans);
  return s;
}

}  // namespace

std::string segment(const SegmenterModel& model, std::string_view raw_line) {
  return format_segmented(segment_raw(model, decode_utf8(raw_line)));
}

std::size_t thread_limit() {
  if (const char* env = std::getenv("KIRU_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers using a fixed
// strided assignment, so results never depend on scheduling.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<Sentence> segment_corpus(const SegmenterModel& model,
                                     const std::vector<Sentence>& corpus,
                                     std::size_t threads) {
  std::vector<Sentence> out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    out[i] = segment_chars(model, corpus[i].chars);
    out[i].domain = corpus[i].domain;
  });
  return out;
}

void segment_stream(const SegmenterModel& model, std::istream& in,
                    std::ostream& out, std::size_t threads) {
  // Chunked so memory stays bounded on long inputs.
  constexpr std::size_t kChunk = 1024;
  std::vector<std::string> lines;
  std::vector<std::string> results;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    results.assign(lines.size(), {});
    std::vector<std::u32string> decoded(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      decoded[i] = decode_utf8(lines[i], line_no - lines.size() + i + 1);
    }
    parallel_for(lines.size(), threads, [&](std::size_t i) {
      results[i] = format_segmented(segment_raw(model, decoded[i]));
    });
    for (const auto& r : results) out << r << '\n';
    lines.clear();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
    if (lines.size() == kChunk) flush();
  }
  if (!lines.empty()) flush();
}

}  // namespace kiru
