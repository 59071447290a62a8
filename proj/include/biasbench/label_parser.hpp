#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace biasbench {

enum class ParseRule { Exact, LabelPrefix, FirstToken, Keyword, None };

const char* parse_rule_name(ParseRule rule);
ParseRule parse_rule_from_name(std::string_view name);

struct ParseResult {
  std::optional<int> label;           // engaged iff rule != None
  ParseRule rule = ParseRule::None;
  std::string raw_excerpt;            // first 200 bytes, cut on a UTF-8 boundary

  bool parsed() const { return label.has_value(); }
};

/// Extracts a binary label from a raw model response. Total function; rules
/// are tried in strict priority order and the first match wins:
///   1. exact         trimmed response is exactly "0" or "1"
///   2. label_prefix  "label" (case-insensitive, any run of whitespace/colons
///                    after it) followed by a standalone 0 or 1; the last
///                    such occurrence in the text wins
///   3. first_token   first standalone 0/1 digit (not part of a longer
///                    number, date, or decimal)
///   4. keyword       whole-word "unbiased" -> 0 else "biased" -> 1, only
///                    when exactly one of the two words is present
/// Anything else is Unparseable.
ParseResult parse_label(std::string_view raw);

}  // namespace biasbench
