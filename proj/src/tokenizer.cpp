#include "damf/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace damf {

namespace {
const char* kSpecials[] = {"<pad>", "<unk>", "<cls>"};
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

Vocabulary Vocabulary::build(const std::vector<const Corpus*>& corpora,
                             int min_count, int max_size) {
  if (min_count < 1)
    throw std::invalid_argument("Vocabulary::build: min_count must be >= 1");
  if (max_size < 4)
    throw std::invalid_argument("Vocabulary::build: max_size too small");

  // std::map: deterministic iteration for the tie-break sort below
  std::map<std::string, std::int64_t> freq;
  for (const Corpus* corpus : corpora) {
    if (!corpus) throw std::invalid_argument("Vocabulary::build: null corpus");
    for (const auto& doc : corpus->documents)
      for (const auto& tok : split_tokens(doc.processed_text)) ++freq[tok];
  }

  std::vector<std::pair<std::string, std::int64_t>> entries;
  entries.reserve(freq.size());
  for (const auto& [tok, n] : freq)
    if (n >= min_count) entries.emplace_back(tok, n);
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (static_cast<int>(entries.size()) > max_size - 3)
    entries.resize(static_cast<std::size_t>(max_size - 3));

  Vocabulary vocab;
  for (const char* s : kSpecials) vocab.id_to_token.emplace_back(s);
  for (const auto& [tok, n] : entries) vocab.id_to_token.push_back(tok);
  for (int i = 0; i < vocab.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[static_cast<std::size_t>(i)]] = i;
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Vocabulary::save: cannot open " + path);
  for (const auto& tok : id_to_token) out << tok << "\n";
  if (!out) throw std::runtime_error("Vocabulary::save: write failed " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocabulary::load: cannot open " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw std::runtime_error("Vocabulary::load: empty token line in " + path);
    vocab.id_to_token.push_back(line);
  }
  if (vocab.size() < 3)
    throw std::runtime_error("Vocabulary::load: missing reserved tokens in " +
                             path);
  for (int i = 0; i < 3; ++i)
    if (vocab.id_to_token[static_cast<std::size_t>(i)] != kSpecials[i])
      throw std::runtime_error("Vocabulary::load: reserved token row " +
                               std::to_string(i) + " is not " + kSpecials[i]);
  for (int i = 0; i < vocab.size(); ++i) {
    if (!vocab.token_to_id
             .emplace(vocab.id_to_token[static_cast<std::size_t>(i)], i)
             .second)
      throw std::runtime_error("Vocabulary::load: duplicate token '" +
                               vocab.id_to_token[static_cast<std::size_t>(i)] +
                               "' in " + path);
  }
  return vocab;
}

}  // namespace damf
