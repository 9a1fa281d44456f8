#include "damf/ddr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "damf/tokenizer.hpp"

namespace damf {

namespace {

int class_index_of(const std::string& name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (name == kClassNames[c]) return c;
  }
  return -1;
}

std::string strip(const std::string& line) {
  std::size_t begin = line.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  std::size_t end = line.find_last_not_of(" \t\r");
  return line.substr(begin, end - begin + 1);
}

Scalar cosine(const Vector& a, const Vector& b) {
  Scalar na = a.norm();
  Scalar nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path);

  Lexicon lex;
  std::array<bool, kNumClasses> seen{};
  int current = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed section header: " + line);
      }
      std::string name = strip(line.substr(1, line.size() - 2));
      current = class_index_of(name);
      if (current < 0) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": unknown class: " + name);
      }
      seen[static_cast<std::size_t>(current)] = true;
      continue;
    }
    if (current < 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": word before any section header: " + line);
    }
    // A line may carry several whitespace-separated entries.
    std::istringstream words(line);
    std::string word;
    while (words >> word) {
      lex.words[static_cast<std::size_t>(current)].push_back(word);
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw std::runtime_error("lexicon " + path + " is missing class [" +
                               std::string(kClassNames[c]) + "]");
    }
  }
  return lex;
}

CentroidTable build_centroids(const Lexicon& lexicon,
                              const EmbeddingTable& embeddings,
                              std::vector<std::string>* skipped) {
  CentroidTable table;
  table.centroids = Matrix::Zero(kNumClasses, embeddings.dim());
  for (int c = 0; c < kNumClasses; ++c) {
    Vector sum = Vector::Zero(embeddings.dim());
    int in_vocab = 0;
    for (const std::string& word : lexicon.words[static_cast<std::size_t>(c)]) {
      if (!embeddings.contains(word)) {
        if (skipped) skipped->push_back(word);
        continue;
      }
      sum += embeddings.vec(word);
      ++in_vocab;
    }
    if (in_vocab == 0) {
      throw std::runtime_error("no in-vocabulary lexicon words for class " +
                               std::string(kClassNames[c]));
    }
    table.centroids.row(c) = sum / static_cast<Scalar>(in_vocab);
  }
  return table;
}

DdrPrediction ddr_predict(const std::string& processed_text,
                          const CentroidTable& centroids,
                          const EmbeddingTable& embeddings) {
  if (centroids.centroids.rows() != kNumClasses ||
      centroids.centroids.cols() != embeddings.dim()) {
    throw std::invalid_argument("centroid table does not match embeddings");
  }
  DdrPrediction pred;
  pred.scores = Vector::Zero(kNumClasses);

  Vector sum = Vector::Zero(embeddings.dim());
  int in_vocab = 0;
  for (const std::string& token : split_tokens(processed_text)) {
    if (!embeddings.contains(token)) continue;
    sum += embeddings.vec(token);
    ++in_vocab;
  }
  if (in_vocab == 0) {
    pred.abstained = true;
    return pred;
  }

  Vector text_vec = sum / static_cast<Scalar>(in_vocab);
  int best = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    pred.scores(c) = cosine(text_vec, centroids.centroids.row(c).transpose());
    if (pred.scores(c) > pred.scores(best)) best = c;  // ties keep lowest index
  }
  pred.class_index = best;
  return pred;
}

Vector ddr_pseudo_logits(const DdrPrediction& prediction) {
  Vector logits = Vector::Constant(kNumClasses, -1.0);
  if (!prediction.abstained) {
    if (prediction.class_index < 0 || prediction.class_index >= kNumClasses) {
      throw std::invalid_argument("prediction has no valid class index");
    }
    logits(prediction.class_index) = 1.0;
  }
  return logits;
}

}  // namespace damf
