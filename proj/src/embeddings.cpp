#include "damf/embeddings.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace damf {

EmbeddingTable EmbeddingTable::load_word2vec_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("embeddings: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("embeddings: empty file " + path);
  std::istringstream header(line);
  long long count = 0;
  int dim = 0;
  if (!(header >> count >> dim) || count < 0 || dim <= 0)
    throw std::runtime_error("embeddings: bad header line in " + path);

  EmbeddingTable table;
  table.dim_ = dim;
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    if (word.empty())
      throw std::runtime_error("embeddings: blank word at line " +
                               std::to_string(line_no));
    Vector v(dim);
    for (int i = 0; i < dim; ++i)
      if (!(fields >> v[i]))
        throw std::runtime_error("embeddings: truncated vector for '" + word +
                                 "' at line " + std::to_string(line_no));
    Scalar extra;
    if (fields >> extra)
      throw std::runtime_error("embeddings: too many components for '" + word +
                               "' at line " + std::to_string(line_no));
    if (!table.vectors_.emplace(word, std::move(v)).second)
      throw std::runtime_error("embeddings: duplicate word '" + word +
                               "' at line " + std::to_string(line_no));
  }
  if (static_cast<long long>(table.vectors_.size()) != count)
    throw std::runtime_error(
        "embeddings: header declared " + std::to_string(count) +
        " vectors, file holds " + std::to_string(table.vectors_.size()));
  return table;
}

const Vector& EmbeddingTable::vec(const std::string& word) const {
  auto it = vectors_.find(word);
  if (it == vectors_.end())
    throw std::out_of_range("embeddings: unknown word '" + word + "'");
  return it->second;
}

void EmbeddingTable::insert(const std::string& word, const Vector& v) {
  if (vectors_.empty())
    dim_ = static_cast<int>(v.size());
  else if (v.size() != dim_)
    throw std::invalid_argument("embeddings: dimension mismatch on insert");
  vectors_[word] = v;
}

}  // namespace damf
