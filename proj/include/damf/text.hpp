#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

namespace damf {

// Codepoint -> ":snake_case_name:" replacements, loaded from the packaged
// table (data/emoji_names.txt). The table file is the contract: lookups use it
// verbatim, codepoints not listed fall through to the non-ASCII filter.
class EmojiTable {
 public:
  static EmojiTable load(const std::string& path);
  // The table shipped with the source tree (path baked in at build time,
  // overridable with the DAMF_DATA_DIR environment variable).
  static const EmojiTable& bundled();

  const std::string* find(char32_t cp) const {
    auto it = names_.find(static_cast<std::uint32_t>(cp));
    return it == names_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::uint32_t, std::string> names_;
};

// Normalizes raw text to ASCII. Fixed rule order:
//   1. drop URL tokens (scheme-prefixed and t.co-style)
//   2. replace @-mention tokens with "@user"
//   3. drop hashtag tokens entirely
//   4. replace emoji codepoints with their table description
//   5. drop remaining non-ASCII characters
//   6. collapse whitespace runs, trim
// Rules 1-3 are re-applied after rule 5 (removing bytes can expose a URL or
// mention shape that was not there before); that makes the pipeline total
// and idempotent on arbitrary input.
std::string preprocess_text(const std::string& raw, const EmojiTable& emoji);
std::string preprocess_text(const std::string& raw);

// Directory holding packaged data files (emoji table, presets). Compile-time
// default, overridable via DAMF_DATA_DIR.
std::string default_data_dir();

}  // namespace damf
