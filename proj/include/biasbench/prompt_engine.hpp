#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biasbench/dataset.hpp"

namespace biasbench {

enum class StrategyKind { ZeroShot, FewShot, ChainOfThought };

const char* strategy_name(StrategyKind kind);          // zero_shot | few_shot | cot
const char* strategy_display_name(StrategyKind kind);  // Zero-shot | Few-shot | Chain-of-Thought
StrategyKind parse_strategy(std::string_view name);

struct Exemplar {
  std::string text;
  int label = 0;
  std::string rationale;  // empty for few-shot exemplars, required for CoT
  std::optional<std::uint64_t> statement_id;  // set when drawn from the dataset
};

struct ExemplarSet {
  std::vector<Exemplar> exemplars;
};

/// Strategy plus its parameters. FewShot carries (seed, k); ChainOfThought
/// carries its two fixed worked exemplars.
struct PromptStrategy {
  StrategyKind kind = StrategyKind::ZeroShot;
  std::uint64_t few_shot_seed = 42;
  int few_shot_k = 8;
  ExemplarSet cot_exemplars;
};

PromptStrategy zero_shot_strategy();
PromptStrategy few_shot_strategy(std::uint64_t seed, int k);
PromptStrategy cot_strategy();

/// The two worked exemplars embedded in templates/cot.txt: one misclassified
/// unbiased statement and one misclassified biased statement, each with the
/// reasoning steps the template spells out.
const ExemplarSet& cot_worked_exemplars();

struct Message {
  std::string role;
  std::string content;
};

struct RenderedPrompt {
  StrategyKind strategy_kind = StrategyKind::ZeroShot;
  std::uint64_t statement_id = 0;
  std::vector<Message> messages;
  std::string content_hash;  // hex sha-256 of canonical_message_serialization
};

/// Raw template bodies, loaded once. Files use Unix newlines and carry no
/// trailing newline; the rendered prompt ends exactly at the final "Label:".
struct TemplateSet {
  std::string zero_shot;
  std::string few_shot;
  std::string cot;
};

TemplateSet load_templates(const std::filesystem::path& dir);

/// Draws k/2 statements per label. Per label there is one splitmix64 stream
/// seeded with seed^label; each draw picks index next() % pool_size from the
/// label's remaining pool (dataset order, order-preserving removal). The
/// returned set lists all k/2 unbiased exemplars first, then the biased ones.
ExemplarSet select_few_shot(const Dataset& dataset, std::uint64_t seed, int k);

/// Renders the single user message for `statement`. FewShot requires
/// `exemplars`; ChainOfThought uses the exemplars carried by the strategy
/// (the template embeds their full text, so only {input} is substituted).
RenderedPrompt render(const PromptStrategy& strategy, const Statement& statement,
                      const TemplateSet& templates,
                      const ExemplarSet* exemplars = nullptr);

/// Compact JSON array of {content, role} objects; the content_hash input.
std::string canonical_message_serialization(const std::vector<Message>& messages);

}  // namespace biasbench
