#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kiru/corpus.hpp"

namespace kiru {

// Exact-span word matching counts; corpus scores sum these (micro average).
struct PrfCounts {
  std::size_t correct = 0;
  std::size_t gold = 0;
  std::size_t pred = 0;

  double precision() const;
  double recall() const;
  double f1() const;

  PrfCounts& operator+=(const PrfCounts& o) {
    correct += o.correct;
    gold += o.gold;
    pred += o.pred;
    return *this;
  }
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Throws PreconditionError when the two sentences differ in characters or
// lack spans.
PrfCounts token_counts(const Sentence& gold, const Sentence& pred);
Prf token_prf(const Sentence& gold, const Sentence& pred);
PrfCounts corpus_counts(const std::vector<Sentence>& gold,
                        const std::vector<Sentence>& pred);

struct SentenceAccuracy {
  std::size_t total = 0;
  std::size_t incorrect = 0;

  double accuracy() const;
};

SentenceAccuracy sentence_accuracy(const std::vector<Sentence>& gold,
                                   const std::vector<Sentence>& pred);

struct DomainRow {
  std::string domain;
  PrfCounts tokens;
  SentenceAccuracy sentences;
};

struct DomainReport {
  std::vector<DomainRow> domains;  // first-appearance order
  DomainRow all;

  // Aligned table with one row per domain and a final "All" row.
  std::string to_text() const;
  std::string to_json() const;
};

// Every gold sentence must carry a domain tag.
DomainReport domain_report(const std::vector<Sentence>& gold,
                           const std::vector<Sentence>& pred);

// Summary over a whole corpus as a DomainRow named "All".
DomainRow summarize(const std::vector<Sentence>& gold,
                    const std::vector<Sentence>& pred);

// key=value lines: precision, recall, f1, sentences, incorrect_sentences,
// sentence_accuracy.
std::string format_summary(const DomainRow& row);

}  // namespace kiru
