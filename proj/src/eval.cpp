#include "kiru/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

#include "kiru/error.hpp"

namespace kiru {

double PrfCounts::precision() const {
  return pred == 0 ? 0.0 : double(correct) / double(pred);
}

double PrfCounts::recall() const {
  return gold == 0 ? 0.0 : double(correct) / double(gold);
}

double PrfCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

double SentenceAccuracy::accuracy() const {
  return total == 0 ? 0.0 : double(total - incorrect) / double(total);
}

namespace {

void check_pair(const Sentence& gold, const Sentence& pred) {
  if (gold.chars != pred.chars) {
    throw PreconditionError("gold and predicted sentences differ in characters");
  }
  if (!gold.spans || !pred.spans) {
    throw PreconditionError("evaluation requires segmented sentences");
  }
}

void check_aligned(const std::vector<Sentence>& gold,
                   const std::vector<Sentence>& pred) {
  if (gold.size() != pred.size()) {
    throw PreconditionError("gold has " + std::to_string(gold.size()) +
                            " sentences, prediction has " +
                            std::to_string(pred.size()));
  }
}

}  // namespace

PrfCounts token_counts(const Sentence& gold, const Sentence& pred) {
  check_pair(gold, pred);
  const auto& g = *gold.spans;
  const auto& p = *pred.spans;
  PrfCounts c;
  c.gold = g.size();
  c.pred = p.size();
  // Both span lists are sorted partitions; merge on begin offsets.
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < g.size() && j < p.size()) {
    if (g[i].begin < p[j].begin) {
      ++i;
    } else if (p[j].begin < g[i].begin) {
      ++j;
    } else {
      if (g[i].end == p[j].end) ++c.correct;
      ++i;
      ++j;
    }
  }
  return c;
}

Prf token_prf(const Sentence& gold, const Sentence& pred) {
  const PrfCounts c = token_counts(gold, pred);
  return {c.precision(), c.recall(), c.f1()};
}

PrfCounts corpus_counts(const std::vector<Sentence>& gold,
                        const std::vector<Sentence>& pred) {
  check_aligned(gold, pred);
  PrfCounts total;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    total += token_counts(gold[k], pred[k]);
  }
  return total;
}

SentenceAccuracy sentence_accuracy(const std::vector<Sentence>& gold,
                                   const std::vector<Sentence>& pred) {
  check_aligned(gold, pred);
  SentenceAccuracy acc;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    check_pair(gold[k], pred[k]);
    ++acc.total;
    if (*gold[k].spans != *pred[k].spans) ++acc.incorrect;
  }
  return acc;
}

DomainRow summarize(const std::vector<Sentence>& gold,
                    const std::vector<Sentence>& pred) {
  return {"All", corpus_counts(gold, pred), sentence_accuracy(gold, pred)};
}

DomainReport domain_report(const std::vector<Sentence>& gold,
                           const std::vector<Sentence>& pred) {
  check_aligned(gold, pred);
  DomainReport report;
  report.all.domain = "All";
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (!gold[k].domain) {
      throw PreconditionError("sentence " + std::to_string(k + 1) +
                              " has no domain tag");
    }
    const std::string& name = *gold[k].domain;
    auto [it, inserted] = index.emplace(name, report.domains.size());
    if (inserted) report.domains.push_back({name, {}, {}});
    DomainRow& row = report.domains[it->second];
    const PrfCounts c = token_counts(gold[k], pred[k]);
    const bool wrong = *gold[k].spans != *pred[k].spans;
    row.tokens += c;
    ++row.sentences.total;
    row.sentences.incorrect += wrong;
    report.all.tokens += c;
    ++report.all.sentences.total;
    report.all.sentences.incorrect += wrong;
  }
  return report;
}

std::string DomainReport::to_text() const {
  std::size_t width = 6;
  for (const auto& row : domains) width = std::max(width, row.domain.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %8s %8s %8s %10s %10s\n",
                static_cast<int>(width), "Domain", "P", "R", "F1",
                "#incorrect", "#sentences");
  out << buf;
  auto emit = [&](const DomainRow& row) {
    std::snprintf(buf, sizeof buf, "%-*s %8.2f %8.2f %8.2f %10zu %10zu\n",
                  static_cast<int>(width), row.domain.c_str(),
                  100 * row.tokens.precision(), 100 * row.tokens.recall(),
                  100 * row.tokens.f1(), row.sentences.incorrect,
                  row.sentences.total);
    out << buf;
  };
  for (const auto& row : domains) emit(row);
  out << std::string(width + 48, '-') << '\n';
  emit(all);
  return out.str();
}

namespace {

nlohmann::json row_json(const DomainRow& row) {
  return {{"domain", row.domain},
          {"precision", row.tokens.precision()},
          {"recall", row.tokens.recall()},
          {"f1", row.tokens.f1()},
          {"correct_words", row.tokens.correct},
          {"gold_words", row.tokens.gold},
          {"pred_words", row.tokens.pred},
          {"sentences", row.sentences.total},
          {"incorrect_sentences", row.sentences.incorrect},
          {"sentence_accuracy", row.sentences.accuracy()}};
}

}  // namespace

std::string DomainReport::to_json() const {
  nlohmann::json doc;
  doc["domains"] = nlohmann::json::array();
  for (const auto& row : domains) doc["domains"].push_back(row_json(row));
  doc["all"] = row_json(all);
  return doc.dump(2);
}

std::string format_summary(const DomainRow& row) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "precision=" << row.tokens.precision() << '\n'
      << "recall=" << row.tokens.recall() << '\n'
      << "f1=" << row.tokens.f1() << '\n'
      << "sentences=" << row.sentences.total << '\n'
      << "incorrect_sentences=" << row.sentences.incorrect << '\n'
      << "sentence_accuracy=" << row.sentences.accuracy() << '\n';
  return out.str();
}

}  // namespace kiru
