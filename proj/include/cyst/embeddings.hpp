#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cyst/error.hpp"
#include "cyst/tensor.hpp"
#include "cyst/vocab.hpp"

namespace cyst {

// Token -> vector map used by the content preservation metric. Sources:
// a text file (one token plus d floats per line) or a trained model's
// word embedding matrix.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  bool has(const std::string& token) const { return index_.count(token) > 0; }

  const std::vector<double>& vec(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw IndexError("token not in embedding table: " + token);
    return vecs_[it->second];
  }

  void insert(const std::string& token, std::vector<double> v) {
    if (token.empty()) throw FormatError("empty token in embedding table");
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) {
      throw FormatError("embedding dimension mismatch for token: " + token);
    }
    auto [it, fresh] = index_.emplace(token, vecs_.size());
    if (!fresh) throw FormatError("duplicate token in embedding table: " + token);
    vecs_.push_back(std::move(v));
  }

  static EmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string token;
      fields >> token;
      std::vector<double> v;
      double x;
      while (fields >> x) v.push_back(x);
      if (!fields.eof()) {
        throw FormatError("bad embedding value at " + path + ":" + std::to_string(lineno));
      }
      if (v.empty()) {
        throw FormatError("no values for token at " + path + ":" + std::to_string(lineno));
      }
      table.insert(token, std::move(v));
    }
    if (table.size() == 0) throw FormatError("empty embedding file: " + path);
    return table;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write embedding file: " + path);
    std::vector<std::string> tokens;
    tokens.reserve(index_.size());
    for (const auto& [token, _] : index_) tokens.push_back(token);
    std::sort(tokens.begin(), tokens.end());
    out.precision(17);
    for (const std::string& token : tokens) {
      out << token;
      for (double x : vec(token)) out << ' ' << x;
      out << '\n';
    }
    if (!out) throw IoError("failed writing embedding file: " + path);
  }

  // Fallback when no external embedding file is given: lift a model's word
  // embedding matrix, skipping the reserved ids so markup tokens in decoded
  // text count as out-of-table.
  static EmbeddingTable from_matrix(const Vocabulary& vocab, const Tensor& word_emb) {
    if (word_emb.rank() != 2 || word_emb.dim(0) != vocab.size()) {
      throw ShapeError("embedding matrix does not match vocabulary size " +
                       std::to_string(vocab.size()));
    }
    EmbeddingTable table;
    const std::size_t d = word_emb.dim(1);
    for (std::size_t id = Vocabulary::kReservedCount; id < vocab.size(); ++id) {
      std::vector<double> v(word_emb.value().begin() + static_cast<std::ptrdiff_t>(id * d),
                            word_emb.value().begin() + static_cast<std::ptrdiff_t>((id + 1) * d));
      table.insert(vocab.token(static_cast<int>(id)), std::move(v));
    }
    return table;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> vecs_;
  std::size_t dim_ = 0;
};

}  // namespace cyst
