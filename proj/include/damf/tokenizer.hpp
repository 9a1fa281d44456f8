#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "damf/types.hpp"

namespace damf {

// Whitespace tokenizer over preprocessed text with a corpus-built vocabulary.
// Ids 0..2 are reserved: pad, unk, cls. Tokens are kept verbatim (the
// preprocessing stage already normalized everything worth normalizing).
struct Vocabulary {
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kClsId = 2;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }

  int id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnkId : it->second;
  }

  // Frequency-then-lexicographic ordering makes the id assignment a pure
  // function of the corpora, independent of hash-map iteration order.
  static Vocabulary build(const std::vector<const Corpus*>& corpora,
                          int min_count = 1, int max_size = 30000);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

// ids[0..length) are real tokens (cls first); ids[length..] is pad and is
// never read by the encoder.
struct TokenSequence {
  std::vector<int> ids;
  int length = 0;
};

std::vector<std::string> split_tokens(const std::string& text);

}  // namespace damf
