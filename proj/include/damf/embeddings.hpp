#pragma once

#include <string>
#include <unordered_map>

#include "damf/types.hpp"

namespace damf {

// Static word vectors in the word2vec text format:
//   first line "count dim", then one "word v1 … v_dim" per line.
class EmbeddingTable {
 public:
  static EmbeddingTable load_word2vec_text(const std::string& path);

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& word) const {
    return vectors_.count(word) > 0;
  }
  const Vector& vec(const std::string& word) const;

  // test/tool hook: build a table in memory
  void insert(const std::string& word, const Vector& v);

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Vector> vectors_;
};

}  // namespace damf
