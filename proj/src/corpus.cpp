#include "kiru/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "kiru/error.hpp"
#include "kiru/unicode.hpp"

namespace kiru {

namespace fs = std::filesystem;

bool is_valid_partition(const std::vector<Span>& spans, std::size_t length) {
  std::size_t pos = 0;
  for (const Span& s : spans) {
    if (s.begin != pos || s.end <= s.begin) return false;
    pos = s.end;
  }
  return pos == length && (length == 0 || !spans.empty());
}

// ---------------------------------------------------------------------------
// Labels

std::size_t label_count(LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::kBIES: return 4;
    case LabelScheme::kBIE: return 3;
    case LabelScheme::kBI: return 2;
  }
  return 0;
}

std::vector<Label> scheme_labels(LabelScheme scheme) {
  std::vector<Label> all{Label::kB, Label::kI, Label::kE, Label::kS};
  all.resize(label_count(scheme));
  return all;
}

char label_char(Label label) {
  static constexpr char kChars[] = {'B', 'I', 'E', 'S'};
  return kChars[static_cast<int>(label)];
}

std::string_view scheme_name(LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::kBIES: return "bies";
    case LabelScheme::kBIE: return "bie";
    case LabelScheme::kBI: return "bi";
  }
  return "?";
}

LabelScheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "bies") return LabelScheme::kBIES;
  if (lower == "bie") return LabelScheme::kBIE;
  if (lower == "bi") return LabelScheme::kBI;
  throw ConfigError("unknown label scheme '" + std::string(name) + "'");
}

LabelSequence encode_labels(const Sentence& sentence, LabelScheme scheme) {
  if (!sentence.spans) {
    throw PreconditionError("encode_labels: sentence has no segmentation");
  }
  const auto& spans = *sentence.spans;
  if (!is_valid_partition(spans, sentence.size())) {
    throw PreconditionError("encode_labels: spans do not partition sentence");
  }
  LabelSequence labels(sentence.size(), Label::kI);
  for (const Span& s : spans) {
    const std::size_t len = s.end - s.begin;
    switch (scheme) {
      case LabelScheme::kBIES:
        if (len == 1) {
          labels[s.begin] = Label::kS;
        } else {
          labels[s.begin] = Label::kB;
          labels[s.end - 1] = Label::kE;
        }
        break;
      case LabelScheme::kBIE:
        labels[s.begin] = Label::kB;
        if (len > 1) labels[s.end - 1] = Label::kE;
        break;
      case LabelScheme::kBI:
        labels[s.begin] = Label::kB;
        break;
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Corpus I/O

Sentence parse_segmented_line(std::string_view line, std::size_t line_no) {
  if (line.front() == ' ' || line.back() == ' ') {
    throw FormatError("line " + std::to_string(line_no) +
                          ": leading or trailing space",
                      line_no);
  }
  if (line.find("  ") != std::string_view::npos) {
    throw FormatError("line " + std::to_string(line_no) + ": double space",
                      line_no);
  }
  const std::u32string decoded = decode_utf8(line, line_no);
  Sentence s;
  s.chars.reserve(decoded.size());
  std::vector<Span> spans;
  std::size_t begin = 0;
  for (char32_t c : decoded) {
    if (c == U' ') {
      spans.push_back({begin, s.chars.size()});
      begin = s.chars.size();
    } else {
      s.chars.push_back(c);
    }
  }
  spans.push_back({begin, s.chars.size()});
  s.spans = std::move(spans);
  return s;
}

std::vector<Sentence> read_segmented(std::istream& in) {
  std::vector<Sentence> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    corpus.push_back(parse_segmented_line(line, line_no));
  }
  return corpus;
}

std::vector<Sentence> read_segmented_corpus(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus '" + path.string() + "'");
  return read_segmented(in);
}

std::vector<Sentence> read_domain_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error("'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Sentence> corpus;
  for (const auto& file : files) {
    auto part = read_segmented_corpus(file);
    const std::string domain = file.stem().string();
    for (auto& s : part) {
      s.domain = domain;
      corpus.push_back(std::move(s));
    }
  }
  return corpus;
}

std::string format_segmented(const Sentence& sentence) {
  std::string out;
  if (!sentence.spans) return encode_utf8(sentence.chars);
  bool first = true;
  for (const Span& s : *sentence.spans) {
    if (!first) out.push_back(' ');
    first = false;
    for (std::size_t i = s.begin; i < s.end; ++i) {
      append_utf8(sentence.chars[i], out);
    }
  }
  return out;
}

void write_segmented(std::ostream& out, const std::vector<Sentence>& corpus) {
  for (const Sentence& s : corpus) out << format_segmented(s) << '\n';
}

std::vector<std::string> sentence_words(const Sentence& sentence) {
  std::vector<std::string> words;
  if (!sentence.spans) return words;
  for (const Span& s : *sentence.spans) {
    words.push_back(encode_utf8(std::u32string_view(sentence.chars)
                                    .substr(s.begin, s.end - s.begin)));
  }
  return words;
}

// ---------------------------------------------------------------------------
// Vocabulary

std::size_t Vocabulary::index(Stream stream, int order) {
  if (order < 1 || order > kMaxOrder) {
    throw PreconditionError("n-gram order must be in 1..3");
  }
  return static_cast<std::size_t>(stream) * kMaxOrder +
         static_cast<std::size_t>(order - 1);
}

Vocabulary Vocabulary::from_keys(
    std::array<std::vector<std::u32string>, 2 * kMaxOrder> keys,
    std::size_t min_count) {
  Vocabulary v;
  v.keys_ = std::move(keys);
  v.min_count_ = min_count;
  v.reindex();
  return v;
}

void Vocabulary::reindex() {
  for (std::size_t t = 0; t < keys_.size(); ++t) {
    ids_[t].clear();
    ids_[t].reserve(keys_[t].size());
    for (std::size_t i = 0; i < keys_[t].size(); ++i) {
      ids_[t].emplace(keys_[t][i], static_cast<std::int32_t>(i) + kReserved);
    }
  }
}

std::int32_t Vocabulary::lookup(Stream stream, int order,
                                std::u32string_view key) const {
  const auto& ids = ids_[index(stream, order)];
  auto it = ids.find(std::u32string(key));
  return it == ids.end() ? kUnk : it->second;
}

std::size_t Vocabulary::size(Stream stream, int order) const {
  return keys_[index(stream, order)].size() + kReserved;
}

const std::vector<std::u32string>& Vocabulary::keys(Stream stream,
                                                    int order) const {
  return keys_[index(stream, order)];
}

std::u32string char_type_string(std::u32string_view chars) {
  std::u32string out(chars.size(), 0);
  for (std::size_t i = 0; i < chars.size(); ++i) {
    out[i] = static_cast<char32_t>(classify_char_type(chars[i]));
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<Sentence>& corpus,
                            std::size_t min_count) {
  if (corpus.empty()) throw PreconditionError("build_vocabulary: empty corpus");
  std::array<std::map<std::u32string, std::size_t>, 2 * kMaxOrder> counts;
  const auto bos_type = static_cast<char32_t>(CharType::kStart);
  for (const Sentence& s : corpus) {
    std::u32string chars(kMaxOrder - 1, kBosChar);
    chars += s.chars;
    std::u32string types(kMaxOrder - 1, bos_type);
    types += char_type_string(s.chars);
    for (std::size_t t = kMaxOrder - 1; t < chars.size(); ++t) {
      for (int n = 1; n <= kMaxOrder; ++n) {
        const std::size_t from = t + 1 - static_cast<std::size_t>(n);
        ++counts[static_cast<std::size_t>(n - 1)][chars.substr(from, n)];
        ++counts[kMaxOrder + static_cast<std::size_t>(n - 1)]
                [types.substr(from, n)];
      }
    }
  }
  std::array<std::vector<std::u32string>, 2 * kMaxOrder> keys;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    for (const auto& [key, count] : counts[t]) {
      if (count >= min_count) keys[t].push_back(key);
    }
  }
  return Vocabulary::from_keys(std::move(keys), min_count);
}

// ---------------------------------------------------------------------------
// Dictionary

SegDictionary::SegDictionary(std::size_t max_len) : max_len_(max_len) {
  if (max_len == 0) throw ConfigError("dictionary max_len must be positive");
  nodes_.emplace_back();
}

std::uint32_t SegDictionary::child(std::uint32_t node, char32_t c) const {
  const auto& kids = nodes_[node].children;
  auto it = std::lower_bound(
      kids.begin(), kids.end(), c,
      [](const auto& kid, char32_t key) { return kid.first < key; });
  return (it != kids.end() && it->first == c) ? it->second : kNone;
}

void SegDictionary::insert(std::u32string_view word) {
  if (word.empty()) return;
  std::uint32_t node = 0;
  for (char32_t c : word) {
    std::uint32_t next = child(node, c);
    if (next == kNone) {
      next = static_cast<std::uint32_t>(nodes_.size());
      auto& kids = nodes_[node].children;
      auto it = std::lower_bound(
          kids.begin(), kids.end(), c,
          [](const auto& kid, char32_t key) { return kid.first < key; });
      kids.insert(it, {c, next});
      nodes_.emplace_back();
    }
    node = next;
  }
  if (!nodes_[node].terminal) {
    nodes_[node].terminal = true;
    ++size_;
    longest_ = std::max(longest_, word.size());
  }
}

bool SegDictionary::contains(std::u32string_view word) const {
  if (word.empty()) return false;
  std::uint32_t node = 0;
  for (char32_t c : word) {
    node = child(node, c);
    if (node == kNone) return false;
  }
  return nodes_[node].terminal;
}

std::vector<std::u32string> SegDictionary::words() const {
  std::vector<std::u32string> out;
  std::u32string prefix;
  // Depth-first over sorted children yields lexicographic order.
  auto walk = [&](auto&& self, std::uint32_t node) -> void {
    if (nodes_[node].terminal) out.push_back(prefix);
    for (const auto& [c, next] : nodes_[node].children) {
      prefix.push_back(c);
      self(self, next);
      prefix.pop_back();
    }
  };
  walk(walk, 0);
  return out;
}

SegDictionary build_dictionary(
    const std::vector<const std::vector<Sentence>*>& corpora,
    bool prune_singletons, std::size_t max_len) {
  std::unordered_map<std::u32string, std::size_t> freq;
  for (const auto* corpus : corpora) {
    for (const Sentence& s : *corpus) {
      if (!s.spans) {
        throw PreconditionError("build_dictionary: unsegmented sentence");
      }
      for (const Span& sp : *s.spans) {
        ++freq[s.chars.substr(sp.begin, sp.end - sp.begin)];
      }
    }
  }
  SegDictionary dict(max_len);
  for (const auto& [word, count] : freq) {
    if (prune_singletons && count == 1) continue;
    dict.insert(word);
  }
  return dict;
}

SegDictionary read_dictionary(const fs::path& path, std::size_t max_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dictionary '" + path.string() + "'");
  SegDictionary dict(max_len);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    dict.insert(decode_utf8(line, line_no));
  }
  return dict;
}

void write_dictionary(std::ostream& out, const SegDictionary& dict) {
  for (const auto& w : dict.words()) out << encode_utf8(w) << '\n';
}

}  // namespace kiru
