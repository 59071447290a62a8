#include "biasbench/label_parser.hpp"

#include <cctype>

#include "biasbench/errors.hpp"

namespace biasbench {
namespace {

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

bool is_ascii_alnum(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::isalnum(u);
}

bool is_ascii_space(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::isspace(u);
}

// A 0/1 that is not glued to a longer number, a decimal, a date component or
// an identifier: "2016", "0.5", "3.0", "1st" and "0x1f" all fail this.
bool standalone_binary_digit(std::string_view s, std::size_t i) {
  if (s[i] != '0' && s[i] != '1') return false;
  if (i > 0) {
    const char prev = s[i - 1];
    if (is_ascii_alnum(prev)) return false;
    if (prev == '.' && i >= 2 && is_ascii_digit(s[i - 2])) return false;
  }
  if (i + 1 < s.size()) {
    const char next = s[i + 1];
    if (is_ascii_alnum(next)) return false;
    if (next == '.' && i + 2 < s.size() && is_ascii_digit(s[i + 2])) return false;
  }
  return true;
}

std::optional<int> match_exact(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size() && is_ascii_space(s[begin])) ++begin;
  std::size_t end = s.size();
  while (end > begin && is_ascii_space(s[end - 1])) --end;
  const std::string_view trimmed = s.substr(begin, end - begin);
  if (trimmed == "0") return 0;
  if (trimmed == "1") return 1;
  return std::nullopt;
}

std::size_t find_label_ci(std::string_view s, std::size_t from) {
  static constexpr std::string_view kWord = "label";
  if (s.size() < kWord.size()) return std::string_view::npos;
  for (std::size_t i = from; i + kWord.size() <= s.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < kWord.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != kWord[k]) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string_view::npos;
}

// "label", any run of whitespace/colons, then a standalone 0/1. Models that
// reason first conclude last, so the last occurrence wins.
std::optional<int> match_label_prefix(std::string_view s) {
  std::optional<int> result;
  std::size_t pos = 0;
  while ((pos = find_label_ci(s, pos)) != std::string_view::npos) {
    std::size_t p = pos + 5;
    while (p < s.size() && (is_ascii_space(s[p]) || s[p] == ':')) ++p;
    if (p < s.size() && standalone_binary_digit(s, p)) {
      result = s[p] - '0';
    }
    ++pos;
  }
  return result;
}

std::optional<int> match_first_token(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (standalone_binary_digit(s, i)) return s[i] - '0';
  }
  return std::nullopt;
}

std::optional<int> match_keyword(std::string_view s) {
  bool has_biased = false;
  bool has_unbiased = false;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isalpha(static_cast<unsigned char>(s[i])) ||
        static_cast<unsigned char>(s[i]) >= 128) {
      ++i;
      continue;
    }
    std::string word;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i])) &&
           static_cast<unsigned char>(s[i]) < 128) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
      ++i;
    }
    if (word == "biased") has_biased = true;
    if (word == "unbiased") has_unbiased = true;
  }
  if (has_unbiased && !has_biased) return 0;
  if (has_biased && !has_unbiased) return 1;
  return std::nullopt;
}

std::string excerpt_of(std::string_view s) {
  constexpr std::size_t kMax = 200;
  if (s.size() <= kMax) return std::string(s);
  std::size_t cut = kMax;
  // back off to a UTF-8 sequence boundary
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut));
}

}  // namespace

const char* parse_rule_name(ParseRule rule) {
  switch (rule) {
    case ParseRule::Exact: return "exact";
    case ParseRule::LabelPrefix: return "label_prefix";
    case ParseRule::FirstToken: return "first_token";
    case ParseRule::Keyword: return "keyword";
    case ParseRule::None: return "none";
  }
  return "none";
}

ParseRule parse_rule_from_name(std::string_view name) {
  if (name == "exact") return ParseRule::Exact;
  if (name == "label_prefix") return ParseRule::LabelPrefix;
  if (name == "first_token") return ParseRule::FirstToken;
  if (name == "keyword") return ParseRule::Keyword;
  if (name == "none") return ParseRule::None;
  throw HarnessError(ErrorCode::InvalidConfig, "unknown parse rule `" + std::string(name) + "`");
}

ParseResult parse_label(std::string_view raw) {
  ParseResult result;
  result.raw_excerpt = excerpt_of(raw);
  if (auto label = match_exact(raw)) {
    result.label = label;
    result.rule = ParseRule::Exact;
  } else if (auto prefixed = match_label_prefix(raw)) {
    result.label = prefixed;
    result.rule = ParseRule::LabelPrefix;
  } else if (auto token = match_first_token(raw)) {
    result.label = token;
    result.rule = ParseRule::FirstToken;
  } else if (auto keyword = match_keyword(raw)) {
    result.label = keyword;
    result.rule = ParseRule::Keyword;
  }
  return result;
}

}  // namespace biasbench
