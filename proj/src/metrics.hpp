#pragma once

// Label accuracy, significance testing, corpus statistics and lexical /
// semantic diversity.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "model.hpp"
#include "text.hpp"

namespace psydial {

/// Fraction of positions whose full label set matches.
double subset_accuracy(const std::vector<ComorbidityProfile>& preds, const std::vector<ComorbidityProfile>& golds);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Binary scores with membership of `label` as the positive class. Zero
/// denominators give 0.
Prf per_label_prf(const std::vector<ComorbidityProfile>& preds, const std::vector<ComorbidityProfile>& golds,
                  Disorder label);

/// Exact two-sided binomial test on discordant counts b and c.
double mcnemar_exact(std::uint64_t b, std::uint64_t c);

enum class CharCount { codepoints, bytes };
CharCount parse_char_count(std::string_view s);
std::string_view to_string(CharCount c);

struct CorpusStats {
  double avg_chars_doctor = 0;
  double avg_chars_patient = 0;
  double avg_turns = 0;
  std::size_t sessions = 0;
};

/// Mean characters over all doctor turns and over all patient turns of the
/// corpus, and mean turn count per session.
CorpusStats dialogue_stats(const std::vector<DialogueSession>& corpus, CharCount count = CharCount::codepoints);

/// Both empty: 1. Exactly one empty: 0.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// 1 - mean pairwise Jaccard over n >= 2 sets.
double intra_emr_diversity(const std::vector<std::set<std::string>>& keyword_sets);

/// Entropy in bits over log2 of the type count; 0 for a single type.
double normalized_entropy(const std::vector<std::string>& tokens);

/// Types seen exactly once over the type count.
double hapax_proportion(const std::vector<std::string>& tokens);

/// 1 - mean pairwise cosine over n >= 2 equal-length non-zero vectors.
double semantic_diversity(const std::vector<std::vector<double>>& vectors);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Bag of tokens hashed into `dim` buckets. All components are counts, so
/// cosines are non-negative.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256, text::TokenizerMode mode = text::TokenizerMode::automatic,
                           std::uint64_t seed = 0x5eed);
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  text::TokenizerMode mode_;
  std::uint64_t seed_;
};

/// Top-k non-stopword tokens of the whole session by frequency, ties broken
/// lexicographically.
std::set<std::string> extract_keywords(const DialogueSession& session, std::size_t k,
                                       const std::set<std::string>& stopwords,
                                       text::TokenizerMode mode = text::TokenizerMode::automatic);

struct DiversityOptions {
  std::size_t keywords_k = 20;
  text::TokenizerMode tokenizer = text::TokenizerMode::automatic;
  std::set<std::string> stopwords;
  /// Defaults to a HashingEmbedder.
  std::shared_ptr<const Embedder> embedder;
};

struct DiversityReport {
  /// Mean over EMRs with at least two sessions; nullopt when there are none.
  std::optional<double> intra_emr;
  double normalized_entropy = 0;
  double hapax = 0;
  /// Over all sessions; nullopt for fewer than two.
  std::optional<double> semantic;
  std::size_t emr_groups = 0;
  std::size_t tokens = 0;
  std::size_t types = 0;
};

DiversityReport compute_diversity(const std::vector<DialogueSession>& corpus, const DiversityOptions& opts);

struct McNemarResult {
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  std::size_t pairs = 0;
  double p_value = 1;
  std::string comparison;
};

struct MetricReport {
  std::optional<std::size_t> evaluated;
  std::optional<double> subset_accuracy;
  std::map<Disorder, Prf> per_label;
  std::optional<McNemarResult> mcnemar;
  std::optional<CorpusStats> corpus_stats;
  std::optional<DiversityReport> diversity;
};

/// Absent parts are written as null.
ordered_json to_json(const MetricReport& r);

}  // namespace psydial
