#include "biasbench/prompt_engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/prng.hpp"
#include "biasbench/sha256.hpp"

namespace biasbench {
namespace {

constexpr std::string_view kInputSlot = "{input}";
constexpr std::string_view kExamplesSlot = "{examples}";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HarnessError(ErrorCode::IoError, "cannot open template " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Replaces each slot token exactly once. Tokens are located in the raw
// template only, so substituted statement text is never rescanned; a template
// with a missing or duplicated slot fails instead of rendering garbage.
std::string fill_slots(std::string_view tpl,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  struct Placement {
    std::size_t pos;
    std::string_view token;
    std::string_view value;
  };
  std::vector<Placement> placements;
  for (const auto& [token, value] : slots) {
    const std::size_t pos = tpl.find(token);
    if (pos == std::string_view::npos) {
      throw HarnessError(ErrorCode::TemplateSlotUnfilled,
                         "template has no " + std::string(token) + " slot");
    }
    if (tpl.find(token, pos + 1) != std::string_view::npos) {
      throw HarnessError(ErrorCode::TemplateSlotUnfilled,
                         "template has more than one " + std::string(token) + " slot");
    }
    placements.push_back({pos, token, value});
  }
  std::sort(placements.begin(), placements.end(),
            [](const Placement& a, const Placement& b) { return a.pos < b.pos; });
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t cursor = 0;
  for (const Placement& placement : placements) {
    out.append(tpl.substr(cursor, placement.pos - cursor));
    out.append(placement.value);
    cursor = placement.pos + placement.token.size();
  }
  out.append(tpl.substr(cursor));
  return out;
}

std::string few_shot_block(const ExemplarSet& exemplars) {
  std::string block;
  for (std::size_t i = 0; i < exemplars.exemplars.size(); ++i) {
    const Exemplar& exemplar = exemplars.exemplars[i];
    if (i > 0) block += "\n\n";
    block += "Statement: ";
    block += exemplar.text;
    block += "\nLabel: ";
    block += exemplar.label == 1 ? '1' : '0';
  }
  return block;
}

void require_cot_exemplars(const ExemplarSet& set) {
  if (set.exemplars.size() != 2) {
    throw HarnessError(ErrorCode::MissingExemplars,
                       "chain-of-thought needs exactly 2 worked exemplars, got " +
                           std::to_string(set.exemplars.size()));
  }
  bool labels_seen[2] = {false, false};
  for (const Exemplar& exemplar : set.exemplars) {
    if (exemplar.rationale.empty()) {
      throw HarnessError(ErrorCode::MissingExemplars,
                         "chain-of-thought exemplars need non-empty rationales");
    }
    labels_seen[exemplar.label == 1 ? 1 : 0] = true;
  }
  if (!labels_seen[0] || !labels_seen[1]) {
    throw HarnessError(ErrorCode::MissingExemplars,
                       "chain-of-thought needs one worked exemplar per class");
  }
}

}  // namespace

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ZeroShot: return "zero_shot";
    case StrategyKind::FewShot: return "few_shot";
    case StrategyKind::ChainOfThought: return "cot";
  }
  return "zero_shot";
}

const char* strategy_display_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ZeroShot: return "Zero-shot";
    case StrategyKind::FewShot: return "Few-shot";
    case StrategyKind::ChainOfThought: return "Chain-of-Thought";
  }
  return "Zero-shot";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "zero_shot") return StrategyKind::ZeroShot;
  if (name == "few_shot") return StrategyKind::FewShot;
  if (name == "cot") return StrategyKind::ChainOfThought;
  throw HarnessError(ErrorCode::InvalidConfig,
                     "unknown strategy `" + std::string(name) + "`");
}

PromptStrategy zero_shot_strategy() {
  PromptStrategy strategy;
  strategy.kind = StrategyKind::ZeroShot;
  return strategy;
}

PromptStrategy few_shot_strategy(std::uint64_t seed, int k) {
  PromptStrategy strategy;
  strategy.kind = StrategyKind::FewShot;
  strategy.few_shot_seed = seed;
  strategy.few_shot_k = k;
  return strategy;
}

PromptStrategy cot_strategy() {
  PromptStrategy strategy;
  strategy.kind = StrategyKind::ChainOfThought;
  strategy.cot_exemplars = cot_worked_exemplars();
  return strategy;
}

const ExemplarSet& cot_worked_exemplars() {
  // The texts below appear verbatim in templates/cot.txt together with the
  // step-by-step reasoning summarized in the rationales.
  static const ExemplarSet kSet = {{
      {"In the video clip above, Bernice apologizes about the entire social media "
       "fiasco between her and Tiny, stating \"I\xE2\x80\x99m very disappointed in "
       "what I did.\"",
       0,
       "Fact-based reporting (objective nature); neutral language; no implicit or "
       "explicit bias.",
       std::nullopt},
      {"Fox News James Rosen and Jake Gibson recently reported the wife of Justice "
       "Department official Bruce G Ohr worked for the opposition research firm "
       "during the 2016 presidential election.",
       1,
       "Selection of facts; contextual omission; implication by association.",
       std::nullopt},
  }};
  return kSet;
}

TemplateSet load_templates(const std::filesystem::path& dir) {
  TemplateSet templates;
  templates.zero_shot = read_file(dir / "zero_shot.txt");
  templates.few_shot = read_file(dir / "few_shot.txt");
  templates.cot = read_file(dir / "cot.txt");
  return templates;
}

ExemplarSet select_few_shot(const Dataset& dataset, std::uint64_t seed, int k) {
  if (k <= 0 || k % 2 != 0) {
    throw HarnessError(ErrorCode::InvalidConfig,
                       "few-shot k must be a positive even number, got " + std::to_string(k));
  }
  const std::size_t per_class = static_cast<std::size_t>(k) / 2;
  ExemplarSet set;
  for (int label = 0; label <= 1; ++label) {
    std::vector<const Statement*> pool;
    for (const Statement& statement : dataset.statements) {
      if (statement.label == label) pool.push_back(&statement);
    }
    if (pool.size() < per_class) {
      throw HarnessError(ErrorCode::InsufficientClassExamples,
                         "need " + std::to_string(per_class) + " statements of label " +
                             std::to_string(label) + ", dataset has " +
                             std::to_string(pool.size()));
    }
    SplitMix64 rng(seed ^ static_cast<std::uint64_t>(label));
    for (std::size_t draw = 0; draw < per_class; ++draw) {
      const std::size_t j = static_cast<std::size_t>(rng.next() % pool.size());
      const Statement* picked = pool[j];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
      set.exemplars.push_back({picked->text, picked->label, "", picked->id});
    }
  }
  return set;
}

RenderedPrompt render(const PromptStrategy& strategy, const Statement& statement,
                      const TemplateSet& templates, const ExemplarSet* exemplars) {
  std::string body;
  switch (strategy.kind) {
    case StrategyKind::ZeroShot:
      body = fill_slots(templates.zero_shot, {{kInputSlot, statement.text}});
      break;
    case StrategyKind::FewShot: {
      if (exemplars == nullptr || exemplars->exemplars.empty()) {
        throw HarnessError(ErrorCode::MissingExemplars,
                           "few-shot rendering needs a selected exemplar set");
      }
      const std::string block = few_shot_block(*exemplars);
      body = fill_slots(templates.few_shot,
                        {{kExamplesSlot, block}, {kInputSlot, statement.text}});
      break;
    }
    case StrategyKind::ChainOfThought:
      require_cot_exemplars(strategy.cot_exemplars);
      body = fill_slots(templates.cot, {{kInputSlot, statement.text}});
      break;
  }

  RenderedPrompt prompt;
  prompt.strategy_kind = strategy.kind;
  prompt.statement_id = statement.id;
  prompt.messages.push_back({"user", std::move(body)});
  prompt.content_hash = sha256_hex(canonical_message_serialization(prompt.messages));
  return prompt;
}

std::string canonical_message_serialization(const std::vector<Message>& messages) {
  nlohmann::json serialized = nlohmann::json::array();
  for (const Message& message : messages) {
    serialized.push_back({{"role", message.role}, {"content", message.content}});
  }
  return serialized.dump();
}

}  // namespace biasbench
