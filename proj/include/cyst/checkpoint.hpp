#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cyst/error.hpp"
#include "cyst/model.hpp"
#include "cyst/vocab.hpp"

// Checkpoint file: "CYST" magic, u32 format version, the vocabulary inline,
// then one record per parameter (length-prefixed name, shape, raw little-
// endian doubles). Architecture is recovered from the parameter shapes, so
// the file is self-describing; absent att.* records mean no attention.

namespace cyst {

namespace detail {

constexpr char kMagic[4] = {'C', 'Y', 'S', 'T'};
constexpr std::uint32_t kVersion = 2;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

inline void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void need(std::istream& in, const std::string& path) {
  if (!in) throw FormatError("checkpoint: truncated or unreadable file " + path);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  need(in, path);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  need(in, path);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = get_u64(in, path);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline std::string get_str(std::istream& in, const std::string& path) {
  const std::uint32_t len = get_u32(in, path);
  if (len > (1u << 20)) throw FormatError("checkpoint: absurd string length in " + path);
  std::string s(len, '\0');
  in.read(s.data(), len);
  need(in, path);
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TransferModel& model,
                            const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(detail::kMagic, 4);
  detail::put_u32(out, detail::kVersion);

  detail::put_u32(out, static_cast<std::uint32_t>(vocab.min_frequency()));
  detail::put_u32(out, static_cast<std::uint32_t>(model.config().max_gen_len));
  detail::put_u64(out, vocab.size() - 4);
  for (std::size_t id = 4; id < vocab.size(); ++id) {
    detail::put_str(out, vocab.token(static_cast<int>(id)));
  }

  const auto named = model.named_params();
  detail::put_u64(out, named.size());
  for (const auto& [name, t] : named) {
    detail::put_str(out, name);
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) detail::put_u64(out, t.dim(d));
    for (double v : t.value()) detail::put_f64(out, v);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

struct LoadedModel {
  Vocabulary vocab;
  TransferModel model;
};

inline LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  detail::need(in, path);
  if (std::memcmp(magic, detail::kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = detail::get_u32(in, path);
  if (version != detail::kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " in " +
                      path);
  }

  const int minfreq = static_cast<int>(detail::get_u32(in, path));
  const std::size_t max_gen_len = static_cast<std::size_t>(detail::get_u32(in, path));
  if (max_gen_len == 0) throw FormatError("checkpoint: zero generation cap in " + path);
  const std::uint64_t n_tokens = detail::get_u64(in, path);
  if (n_tokens > (1u << 26)) throw FormatError("checkpoint: absurd token count in " + path);
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(detail::get_str(in, path));
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens), minfreq);

  struct Record {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };
  const std::uint64_t n_params = detail::get_u64(in, path);
  std::vector<Record> records;
  records.reserve(n_params);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    Record rec;
    rec.name = detail::get_str(in, path);
    const std::uint32_t rank = detail::get_u32(in, path);
    if (rank > 4) throw FormatError("checkpoint: absurd rank in " + path);
    for (std::uint32_t d = 0; d < rank; ++d) {
      rec.shape.push_back(static_cast<std::size_t>(detail::get_u64(in, path)));
    }
    const std::size_t n = shape_numel(rec.shape);
    if (n > (1u << 28)) throw FormatError("checkpoint: absurd tensor size in " + path);
    rec.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) rec.values.push_back(detail::get_f64(in, path));
    records.push_back(std::move(rec));
  }

  auto find = [&](const std::string& name) -> const Record* {
    for (const Record& r : records) {
      if (r.name == name) return &r;
    }
    return nullptr;
  };

  const Record* word = find("emb.word");
  const Record* style = find("emb.style");
  if (!word || word->shape.size() != 2 || !style || style->shape.size() != 2) {
    throw FormatError("checkpoint: missing embedding records in " + path);
  }
  ModelConfig cfg;
  cfg.vocab_size = word->shape[0];
  cfg.emb_dim = word->shape[1];
  cfg.hidden = style->shape[1];
  cfg.max_gen_len = max_gen_len;
  cfg.use_attention = find("att.w") != nullptr;
  if (cfg.vocab_size != vocab.size()) {
    throw FormatError("checkpoint: embedding rows disagree with vocabulary in " + path);
  }
  cfg.filter_widths.clear();
  for (const Record& r : records) {
    // Names are cls.conv<w>.w; widths recorded in file order.
    if (r.name.rfind("cls.conv", 0) == 0 && r.name.size() > 10 &&
        r.name.substr(r.name.size() - 2) == ".w") {
      cfg.filter_widths.push_back(
          static_cast<std::size_t>(std::stoul(r.name.substr(8, r.name.size() - 10))));
      cfg.n_maps = r.shape.size() == 2 ? r.shape[1] : 0;
    }
  }
  if (cfg.filter_widths.empty()) {
    throw FormatError("checkpoint: missing classifier records in " + path);
  }

  Rng scratch(0);
  TransferModel model(cfg, scratch);
  const auto named = model.named_params();
  if (named.size() != records.size()) {
    throw FormatError("checkpoint: parameter count mismatch in " + path);
  }
  for (const auto& [name, t] : named) {
    const Record* rec = find(name);
    if (!rec) throw FormatError("checkpoint: missing record " + name + " in " + path);
    if (rec->shape != t.shape()) {
      throw FormatError("checkpoint: shape mismatch for " + name + " in " + path);
    }
    Tensor dst = t;
    dst.value() = rec->values;
  }
  return LoadedModel{std::move(vocab), std::move(model)};
}

}  // namespace cyst
