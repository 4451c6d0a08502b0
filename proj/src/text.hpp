#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace psydial::text {

/// Number of UTF-8 code points (invalid bytes count as one each).
std::size_t codepoint_count(std::string_view s);

/// Splits a UTF-8 string into code points.
std::vector<std::string> codepoints(std::string_view s);

std::string ascii_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Replaces `{key}` placeholders from `values`. Unknown placeholders are left
/// untouched.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Longest prefix of at most `max_chars` code points ending at a sentence
/// boundary; falls back to a word boundary, then to a hard cut.
std::string truncate_at_sentence(std::string_view s, std::size_t max_chars);

enum class TokenizerMode { automatic, whitespace, codepoint };
TokenizerMode parse_tokenizer_mode(std::string_view s);

/// Lowercased tokens. Whitespace mode splits on spaces and strips surrounding
/// punctuation; code points outside ASCII are emitted one per token in
/// automatic mode, so unsegmented scripts still yield a vocabulary.
std::vector<std::string> tokenize(std::string_view s, TokenizerMode mode = TokenizerMode::automatic);

/// Lowercase word tokens split on anything that is not a letter, digit or
/// apostrophe. Used by the classifier fallback and keyword matching.
std::vector<std::string> words(std::string_view s);

std::set<std::string> load_word_list(const std::string& path);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace psydial::text
