#include <doctest.h>

#include <json.hpp>

#include "biasbench/label_parser.hpp"
#include "biasbench/prng.hpp"
#include "support/test_util.hpp"

using namespace biasbench;

namespace {

struct Fixture {
  std::string raw;
  std::optional<int> label;
  ParseRule rule;
};

std::vector<Fixture> load_fixtures() {
  const std::string content =
      testutil::read_file(testutil::repo_dir() / "fixtures/tricky_responses.jsonl");
  std::vector<Fixture> fixtures;
  std::size_t begin = 0;
  while (begin < content.size()) {
    std::size_t end = content.find('\n', begin);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(begin, end - begin);
    begin = end + 1;
    if (line.empty()) continue;
    const nlohmann::json parsed = nlohmann::json::parse(line);
    Fixture fixture;
    fixture.raw = parsed.at("raw").get<std::string>();
    if (!parsed.at("expected_label_or_null").is_null()) {
      fixture.label = parsed.at("expected_label_or_null").get<int>();
    }
    fixture.rule = parse_rule_from_name(parsed.at("expected_rule").get<std::string>());
    fixtures.push_back(std::move(fixture));
  }
  return fixtures;
}

std::string random_string(SplitMix64& rng) {
  const std::size_t length = rng.next() % 120;
  std::string out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    switch (rng.next() % 4) {
      case 0:  // printable ascii
        out.push_back(static_cast<char>(' ' + rng.next() % 95));
        break;
      case 1: {  // digits, separators and label-ish letters
        static constexpr std::string_view kBiasedBytes = "0123456789.:- \n\tlabeLABEL";
        out.push_back(kBiasedBytes[rng.next() % kBiasedBytes.size()]);
        break;
      }
      case 2: {  // valid multi-byte utf-8
        static const char* samples[] = {"\xC3\xA9", "\xE2\x80\x94", "\xE3\x81\xAA",
                                        "\xF0\x9F\x99\x82"};
        out += samples[rng.next() % 4];
        break;
      }
      default:  // arbitrary bytes, possibly invalid utf-8
        out.push_back(static_cast<char>(rng.next() % 256));
        break;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("label_parser") {

TEST_CASE("the tricky-response corpus parses with the documented rules") {
  const auto fixtures = load_fixtures();
  REQUIRE(fixtures.size() >= 30);
  for (const Fixture& fixture : fixtures) {
    CAPTURE(fixture.raw);
    const ParseResult result = parse_label(fixture.raw);
    CHECK(result.rule == fixture.rule);
    CHECK(result.label == fixture.label);
    CHECK(result.parsed() == (result.rule != ParseRule::None));
  }
}

TEST_CASE("headline cases") {
  CHECK(parse_label(" 1\n").rule == ParseRule::Exact);
  CHECK(parse_label(" 1\n").label == 1);

  const ParseResult explained =
      parse_label("Label: 1\nThe statement cherry-picks facts about the official.");
  CHECK(explained.rule == ParseRule::LabelPrefix);
  CHECK(explained.label == 1);

  CHECK_FALSE(parse_label("I cannot classify this statement.").parsed());

  const ParseResult year = parse_label("The text from 2016 is neutral. Label: 0");
  CHECK(year.rule == ParseRule::LabelPrefix);
  CHECK(year.label == 0);
}

TEST_CASE("totality under fuzzing") {
  SplitMix64 rng(20240807);
  for (int i = 0; i < 5000; ++i) {
    const std::string raw = random_string(rng);
    const ParseResult result = parse_label(raw);  // must not throw
    if (result.parsed()) {
      CHECK((*result.label == 0 || *result.label == 1));
      CHECK(result.rule != ParseRule::None);
    } else {
      CHECK(result.rule == ParseRule::None);
    }
    CHECK(result.raw_excerpt.size() <= 200);
  }
}

TEST_CASE("appending explanations never flips a label-prefixed parse") {
  static const char* suffixes[] = {
      "\nThis is additional explanation without the keyword.",
      " -- because the statement cherry-picks facts.",
      "\n\nFurther reasoning follows here, with dates like 2016-05-04.",
  };
  for (const Fixture& fixture : load_fixtures()) {
    if (fixture.rule != ParseRule::LabelPrefix) continue;
    for (const char* suffix : suffixes) {
      const ParseResult appended = parse_label(fixture.raw + suffix);
      CAPTURE(fixture.raw);
      CAPTURE(suffix);
      CHECK(appended.label == fixture.label);
    }
  }
}

TEST_CASE("excerpt is truncated on a utf-8 boundary") {
  std::string raw;
  for (int i = 0; i < 120; ++i) raw += "\xE3\x81\xAA";  // 3-byte sequences
  const ParseResult result = parse_label(raw);
  CHECK(result.raw_excerpt.size() <= 200);
  CHECK(result.raw_excerpt.size() % 3 == 0);
}

}  // TEST_SUITE
