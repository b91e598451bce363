// Model file layout (all integers little-endian):
//
//   "KIRU"  u16 version  u64 payload_length
//   payload:
//     u32 header_length, header (UTF-8 JSON: config, label set, feature
//       flags, vocabulary sizes, dictionary-vector ordering)
//     6 vocabulary tables (char uni/bi/tri, ctype uni/bi/tri):
//       u32 count, then count x (u32 length, length x u32 code point)
//     dictionary: u8 present, u32 count, words as above
//     u32 tensor_count, then per tensor:
//       u32 name_length, name, u32 rows, u32 cols, u64 byte_length,
//       rows*cols x f32
//   u32 CRC-32 of every preceding byte

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "kiru/error.hpp"
#include "kiru/model.hpp"

namespace kiru {

namespace {

using Kind = LoadError::Kind;
constexpr char kMagic[4] = {'K', 'I', 'R', 'U'};
constexpr std::size_t kPreludeSize = 4 + 2 + 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void u32string(const std::u32string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    for (char32_t c : s) uint(static_cast<std::uint32_t>(c));
  }
  void string(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::u32string u32string() {
    const auto n = uint<std::uint32_t>();
    need(std::size_t{n} * 4);
    std::u32string s(n, 0);
    for (auto& c : s) c = static_cast<char32_t>(uint<std::uint32_t>());
    return s;
  }
  std::string string() {
    const auto n = uint<std::uint32_t>();
    return std::string(take(n));
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw LoadError(Kind::kMalformed, "model payload ends unexpectedly");
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos),
                static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"arch", arch_name(c.arch)},
          {"use_ctype", c.use_ctype},
          {"ngram_orders", c.ngram_orders},
          {"use_dict", c.use_dict},
          {"window", c.window},
          {"char_dim", c.char_dim},
          {"ctype_dim", c.ctype_dim},
          {"hidden", c.hidden},
          {"scheme", scheme_name(c.scheme)},
          {"learning_rate", c.learning_rate},
          {"l2", c.l2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"dict_max_len", c.dict_max_len},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.use_ctype = j.at("use_ctype").get<bool>();
  c.ngram_orders = j.at("ngram_orders").get<std::vector<int>>();
  c.use_dict = j.at("use_dict").get<bool>();
  c.window = j.at("window").get<std::size_t>();
  c.char_dim = j.at("char_dim").get<std::size_t>();
  c.ctype_dim = j.at("ctype_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.dict_max_len = j.at("dict_max_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

std::vector<std::string> dict_vector_order(std::size_t max_len) {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= max_len; ++k) names.push_back("L" + std::to_string(k));
  for (std::size_t k = 1; k <= max_len; ++k) names.push_back("R" + std::to_string(k));
  for (std::size_t k = 2; k <= max_len; ++k) names.push_back("I" + std::to_string(k));
  return names;
}

void write_tensor(Writer& w, const std::string& name,
                  const nn::Tensor<float>& t) {
  w.string(name);
  w.uint(static_cast<std::uint32_t>(t.rows()));
  w.uint(static_cast<std::uint32_t>(t.cols()));
  w.uint(static_cast<std::uint64_t>(t.size() * 4));
  for (float v : t.values()) w.f32(v);
}

}  // namespace

void SegmenterModel::save(std::ostream& out) const {
  Writer payload;

  nlohmann::json header;
  header["format"] = "kiru-model";
  header["config"] = config_json(config_);
  std::vector<std::string> labels;
  for (Label l : scheme_labels(config_.scheme)) labels.emplace_back(1, label_char(l));
  header["labels"] = labels;
  header["features"] = {{"ctype", config_.use_ctype},
                        {"ngram_orders", config_.ngram_orders},
                        {"dict", config_.use_dict}};
  nlohmann::json sizes;
  for (int n = 1; n <= kMaxOrder; ++n) {
    sizes["char"].push_back(vocab_.size(Stream::kChar, n));
    sizes["ctype"].push_back(vocab_.size(Stream::kCharType, n));
  }
  header["vocab_sizes"] = sizes;
  header["vocab_min_count"] = vocab_.min_count();
  header["dict_vector_order"] = dict_vector_order(config_.dict_max_len);
  header["dict_words"] = dict_ ? dict_->size() : 0;
  payload.string(header.dump());

  for (Stream s : {Stream::kChar, Stream::kCharType}) {
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto& keys = vocab_.keys(s, n);
      payload.uint(static_cast<std::uint32_t>(keys.size()));
      for (const auto& k : keys) payload.u32string(k);
    }
  }

  payload.uint(static_cast<std::uint8_t>(dict_ ? 1 : 0));
  const auto words = dict_ ? dict_->words() : std::vector<std::u32string>{};
  payload.uint(static_cast<std::uint32_t>(words.size()));
  for (const auto& word : words) payload.u32string(word);

  std::uint32_t count = 0;
  weights_.for_each([&](const std::string&, const nn::Tensor<float>&) { ++count; });
  payload.uint(2 * count);
  weights_.for_each([&](const std::string& name, const nn::Tensor<float>& t) {
    write_tensor(payload, name, t);
  });
  accum_.for_each([&](const std::string& name, const nn::Tensor<float>& t) {
    write_tensor(payload, "adagrad:" + name, t);
  });

  Writer file;
  file.bytes(kMagic, 4);
  file.uint(kModelFormatVersion);
  file.uint(static_cast<std::uint64_t>(payload.buffer().size()));
  file.buffer() += payload.buffer();
  file.uint(crc32_of(file.buffer()));
  out.write(file.buffer().data(),
            static_cast<std::streamsize>(file.buffer().size()));
}

void SegmenterModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model '" + path.string() + "'");
  save(out);
  if (!out) throw Error("failed writing model '" + path.string() + "'");
}

SegmenterModel SegmenterModel::load_bytes(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw LoadError(Kind::kBadMagic, "not a kiru model file");
  }
  if (bytes.size() < kPreludeSize) {
    throw LoadError(Kind::kTruncated, "model file truncated");
  }
  Reader prelude(bytes.substr(4, kPreludeSize - 4));
  const auto version = prelude.uint<std::uint16_t>();
  const auto payload_len = prelude.uint<std::uint64_t>();
  const std::size_t available = bytes.size() - kPreludeSize;
  if (available < 4 || payload_len > available - 4) {
    throw LoadError(Kind::kTruncated, "model file truncated");
  }
  if (payload_len != available - 4) {
    throw LoadError(Kind::kMalformed, "trailing bytes after model payload");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader trailer(bytes.substr(bytes.size() - 4));
  if (trailer.uint<std::uint32_t>() != crc32_of(body)) {
    throw LoadError(Kind::kChecksum, "model checksum mismatch");
  }
  if (version != kModelFormatVersion) {
    throw LoadError(Kind::kVersion,
                    "unsupported model format version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");
  }

  Reader r(bytes.substr(kPreludeSize, payload_len));
  SegmenterModel m;
  try {
    const auto header = nlohmann::json::parse(r.string());
    m.config_ = config_from_json(header.at("config"));

    std::array<std::vector<std::u32string>, 2 * kMaxOrder> keys;
    for (auto& table : keys) {
      const auto n = r.uint<std::uint32_t>();
      table.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) table.push_back(r.u32string());
    }
    m.vocab_ = Vocabulary::from_keys(std::move(keys),
                                     header.at("vocab_min_count").get<std::size_t>());

    const bool has_dict = r.uint<std::uint8_t>() != 0;
    const auto words = r.uint<std::uint32_t>();
    if (has_dict) m.dict_.emplace(m.config_.dict_max_len);
    for (std::uint32_t i = 0; i < words; ++i) {
      auto word = r.u32string();
      if (has_dict) m.dict_->insert(word);
    }
    if (m.config_.use_dict && !m.dict_) {
      throw LoadError(Kind::kMalformed, "dictionary model without dictionary");
    }

    m.weights_ = make_weights<float>(m.config_, m.vocab_);
    m.accum_ = m.weights_.zeros_like();
    std::map<std::string, nn::Tensor<float>*> slots;
    m.weights_.for_each([&](const std::string& name, nn::Tensor<float>& t) {
      slots[name] = &t;
    });
    m.accum_.for_each([&](const std::string& name, nn::Tensor<float>& t) {
      slots["adagrad:" + name] = &t;
    });
    const auto tensors = r.uint<std::uint32_t>();
    if (tensors != slots.size()) {
      throw LoadError(Kind::kMalformed, "unexpected tensor count");
    }
    for (std::uint32_t i = 0; i < tensors; ++i) {
      const std::string name = r.string();
      const auto rows = r.uint<std::uint32_t>();
      const auto cols = r.uint<std::uint32_t>();
      const auto byte_len = r.uint<std::uint64_t>();
      auto it = slots.find(name);
      if (it == slots.end() || it->second->rows() != rows ||
          it->second->cols() != cols ||
          byte_len != std::uint64_t{rows} * cols * 4) {
        throw LoadError(Kind::kMalformed, "unexpected tensor '" + name + "'");
      }
      for (auto& v : it->second->values()) v = r.f32();
      slots.erase(it);
    }
    if (!r.done()) throw LoadError(Kind::kMalformed, "unexpected trailing data");
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(Kind::kMalformed, std::string("malformed model: ") + e.what());
  }
  return m;
}

SegmenterModel SegmenterModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_bytes(buf.str());
}

}  // namespace kiru
