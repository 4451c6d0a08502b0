#pragma once

// Reading generated corpora and the gold labels they are scored against.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"

namespace psydial {

/// One session per non-blank line. A bad line raises ParseError carrying
/// its 1-based line number. An empty file yields an empty vector.
std::vector<DialogueSession> read_corpus(const std::filesystem::path& path);

struct GoldLabels {
  enum class Key { emr_id, session_id } key = Key::emr_id;
  std::map<std::string, ComorbidityProfile> labels;
};

/// Gold labels from either EMR records (file, JSONL or directory; keyed by
/// emr_id and taken from the preliminary diagnosis) or a JSONL of
/// {"session_id", "labels"} objects.
GoldLabels load_gold(const std::filesystem::path& path);

struct AlignedLabels {
  std::vector<std::string> session_ids;
  std::vector<ComorbidityProfile> predicted;
  std::vector<ComorbidityProfile> gold;
};

/// Pairs every session with its gold entry. Throws ValidationError when a
/// session has no gold entry, naming the first few.
AlignedLabels align(const std::vector<DialogueSession>& corpus, const GoldLabels& gold);

/// Discordant counts of two scorings over the same items.
struct DiscordantPair {
  std::size_t b = 0;  ///< first right, second wrong
  std::size_t c = 0;  ///< first wrong, second right
  std::size_t pairs = 0;
};

/// Compares `treatment` against `baseline` on sessions sharing a
/// session_id; sessions present in only one corpus are ignored.
DiscordantPair discordant_by_session(const std::vector<DialogueSession>& treatment,
                                     const std::vector<DialogueSession>& baseline, const GoldLabels& gold);

/// Within one corpus, pairs the symptom_informed and random sessions that
/// share EMR, FED and doctor profile. nullopt when no such pair exists.
std::optional<DiscordantPair> discordant_by_strategy(const std::vector<DialogueSession>& corpus,
                                                     const GoldLabels& gold);

}  // namespace psydial
