#include "text.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace psydial::text {

namespace {

// Byte length of the UTF-8 sequence starting with `lead`; 1 for invalid bytes.
std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::size_t next_boundary(std::string_view s, std::size_t i) {
  std::size_t len = sequence_length(static_cast<unsigned char>(s[i]));
  if (i + len > s.size()) return i + 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return i + 1;
  }
  return i + len;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
}

std::string strip_edges(std::string_view w, std::string_view junk) {
  std::size_t b = 0;
  std::size_t e = w.size();
  while (b < e && junk.find(w[b]) != std::string_view::npos) ++b;
  while (e > b && junk.find(w[e - 1]) != std::string_view::npos) --e;
  return std::string(w.substr(b, e - b));
}

}  // namespace

std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i = next_boundary(s, i)) ++n;
  return n;
}

std::vector<std::string> codepoints(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = next_boundary(s, i);
    out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (prefix.size() > s.size()) return false;
  return ascii_lower(s.substr(0, prefix.size())) == ascii_lower(prefix);
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

std::string truncate_at_sentence(std::string_view s, std::size_t max_chars) {
  if (codepoint_count(s) <= max_chars) return std::string(s);
  std::size_t cut = 0;
  for (std::size_t n = 0; n < max_chars && cut < s.size(); ++n) cut = next_boundary(s, cut);
  const std::string_view prefix = s.substr(0, cut);
  for (std::size_t i = prefix.size(); i > 0; --i) {
    const char c = prefix[i - 1];
    if ((c == '.' || c == '!' || c == '?') && (i == s.size() || is_space(s[i]))) {
      std::string out = trim(prefix.substr(0, i));
      if (!out.empty()) return out;
    }
  }
  if (auto sp = prefix.find_last_of(" \t\n"); sp != std::string_view::npos && sp > 0) {
    std::string out = trim(prefix.substr(0, sp));
    if (!out.empty()) return out;
  }
  return std::string(prefix);
}

TokenizerMode parse_tokenizer_mode(std::string_view s) {
  if (s == "auto" || s == "automatic") return TokenizerMode::automatic;
  if (s == "whitespace") return TokenizerMode::whitespace;
  if (s == "codepoint") return TokenizerMode::codepoint;
  throw std::invalid_argument("unknown tokenizer '" + std::string(s) + "' (expected auto, whitespace or codepoint)");
}

std::vector<std::string> tokenize(std::string_view s, TokenizerMode mode) {
  std::vector<std::string> out;
  auto emit = [&out](std::string_view w) {
    std::string t = ascii_lower(strip_edges(w, "'-"));
    if (!t.empty()) out.push_back(std::move(t));
  };

  switch (mode) {
    case TokenizerMode::whitespace: {
      std::size_t i = 0;
      while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) {
          std::string t = ascii_lower(strip_edges(s.substr(i, j - i), "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"));
          if (!t.empty()) out.push_back(std::move(t));
        }
        i = j;
      }
      break;
    }
    case TokenizerMode::codepoint:
      for (auto& cp : codepoints(s)) {
        if (cp.size() == 1 && (is_space(cp[0]) || std::ispunct(static_cast<unsigned char>(cp[0])))) continue;
        out.push_back(ascii_lower(cp));
      }
      break;
    case TokenizerMode::automatic: {
      std::size_t start = std::string_view::npos;
      std::size_t i = 0;
      while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80 && is_word_char(static_cast<char>(c))) {
          if (start == std::string_view::npos) start = i;
          ++i;
          continue;
        }
        if (start != std::string_view::npos) {
          emit(s.substr(start, i - start));
          start = std::string_view::npos;
        }
        const std::size_t j = next_boundary(s, i);
        if (c >= 0x80) out.emplace_back(s.substr(i, j - i));
        i = j;
      }
      if (start != std::string_view::npos) emit(s.substr(start));
      break;
    }
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(strip_edges(cur, "'"));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(strip_edges(cur, "'"));
  std::erase_if(out, [](const std::string& w) { return w.empty(); });
  return out;
}

std::set<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read word list " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.insert(ascii_lower(t));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace psydial::text
