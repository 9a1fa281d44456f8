#include "damf/text.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace damf {

std::string default_data_dir() {
  if (const char* env = std::getenv("DAMF_DATA_DIR"); env && *env) return env;
#ifdef DAMF_DATA_DIR_DEFAULT
  return DAMF_DATA_DIR_DEFAULT;
#else
  return "data";
#endif
}

EmojiTable EmojiTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open emoji table: " + path);
  EmojiTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') continue;
    std::istringstream ss(line);
    std::string hex, name;
    ss >> hex >> name;
    const auto bad = [&](const char* why) {
      return std::runtime_error(path + ":" + std::to_string(line_no) +
                                ": " + why);
    };
    if (hex.empty() || name.empty()) throw bad("expected '<hex> :name:'");
    if (hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
      throw bad("codepoint is not hexadecimal");
    if (name.size() < 3 || name.front() != ':' || name.back() != ':')
      throw bad("name must be wrapped in colons");
    table.names_[static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16))] =
        name;
  }
  return table;
}

const EmojiTable& EmojiTable::bundled() {
  static const EmojiTable table = load(default_data_dir() + "/emoji_names.txt");
  return table;
}

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_url_token(const std::string& tok) {
  if (tok.rfind("t.co/", 0) == 0) return true;
  // scheme://...
  std::size_t i = 0;
  if (i >= tok.size() || !std::isalpha(static_cast<unsigned char>(tok[i]))) return false;
  ++i;
  while (i < tok.size() &&
         (std::isalnum(static_cast<unsigned char>(tok[i])) || tok[i] == '+' ||
          tok[i] == '-' || tok[i] == '.'))
    ++i;
  return tok.compare(i, 3, "://") == 0;
}

// Decodes one UTF-8 codepoint starting at i; advances i. Invalid bytes decode
// as 0xFFFD one byte at a time so every input is handled.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  int len;
  char32_t cp;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 >> 5) == 0x6) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 >> 4) == 0xE) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 >> 3) == 0x1E) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t out = cp;
  for (int k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b >> 6) != 0x2) {
      ++i;
      return 0xFFFD;
    }
    out = (out << 6) | (b & 0x3F);
  }
  i += len;
  return out;
}

}  // namespace

namespace {

// URL / mention / hashtag rules, applied per whitespace-separated token.
// Joining with single spaces doubles as the collapse-and-trim step.
std::string token_pass(const std::string& text) {
  std::string joined;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t start = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    std::string tok = text.substr(start, i - start);
    if (is_url_token(tok)) continue;
    if (tok.size() > 1 && tok[0] == '#') continue;
    if (tok.size() > 1 && tok[0] == '@') tok = "@user";
    if (!joined.empty()) joined += ' ';
    joined += tok;
  }
  return joined;
}

}  // namespace

std::string preprocess_text(const std::string& raw, const EmojiTable& emoji) {
  const std::string tokens = token_pass(raw);

  // codepoint pass: emoji replacement, then ASCII filter
  std::string out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    const char32_t cp = decode_utf8(tokens, i);
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (const std::string* name = emoji.find(cp)) {
      out += *name;
    }
    // other non-ASCII dropped
  }

  // Dropping non-ASCII bytes can leave behind a token that now matches the
  // URL/mention/hashtag rules (e.g. "caf\xC3\xA9http://x" -> "cafhttp://x"),
  // so the token rules run once more. On all-ASCII text they are a fixed
  // point, which is what makes the whole pipeline idempotent.
  return token_pass(out);
}

std::string preprocess_text(const std::string& raw) {
  return preprocess_text(raw, EmojiTable::bundled());
}

}  // namespace damf
