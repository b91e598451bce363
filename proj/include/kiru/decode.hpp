#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kiru/corpus.hpp"

namespace kiru {

class SegmenterModel;

// Per-position argmax. Exact ties resolve to the earliest label in B < I < E
// < S order.
LabelSequence predict_labels(const std::vector<std::vector<float>>& dists,
                             LabelScheme scheme);

// A word boundary opens before position t iff t == 0 or label(t) is B or S
// (B only under BI). Every label sequence decodes to a valid partition;
// inconsistent E/I labels are ignored.
std::vector<Span> labels_to_segmentation(const LabelSequence& labels,
                                         LabelScheme scheme);

Sentence segment_chars(const SegmenterModel& model, std::u32string chars);

// Segments one raw UTF-8 line; words are joined by single spaces.
std::string segment(const SegmenterModel& model, std::string_view raw_line);

// Segments a corpus (spans of the input are ignored), running up to
// `threads` sentences concurrently. Output order matches input order.
std::vector<Sentence> segment_corpus(const SegmenterModel& model,
                                     const std::vector<Sentence>& corpus,
                                     std::size_t threads = 1);

// Line-by-line segmentation of raw text; empty lines stay empty.
void segment_stream(const SegmenterModel& model, std::istream& in,
                    std::ostream& out, std::size_t threads = 1);

// Worker count from KIRU_THREADS, defaulting to the hardware concurrency.
std::size_t thread_limit();

}  // namespace kiru
