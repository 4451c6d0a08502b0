#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rng.hpp"

namespace psydial {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw PreconditionError("prediction and gold lists differ in length (" + std::to_string(a) + " vs " +
                            std::to_string(b) + ")");
}

std::unordered_map<std::string, std::size_t> frequencies(const std::vector<std::string>& tokens) {
  std::unordered_map<std::string, std::size_t> f;
  for (const auto& t : tokens) ++f[t];
  return f;
}

}  // namespace

double subset_accuracy(const std::vector<ComorbidityProfile>& preds, const std::vector<ComorbidityProfile>& golds) {
  require_same_length(preds.size(), golds.size());
  if (preds.empty()) throw PreconditionError("subset accuracy over an empty list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

Prf per_label_prf(const std::vector<ComorbidityProfile>& preds, const std::vector<ComorbidityProfile>& golds,
                  Disorder label) {
  require_same_length(preds.size(), golds.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i].contains(label);
    const bool g = golds[i].contains(label);
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  Prf r;
  if (tp + fp) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double mcnemar_exact(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const std::uint64_t k = std::min(b, c);
  double tail;
  if (n <= 1000) {
    // 2^-n is exact here and the running binomial terms stay representable.
    double term = std::ldexp(1.0, -static_cast<int>(n));
    tail = term;
    for (std::uint64_t i = 0; i < k; ++i) {
      term = term * static_cast<double>(n - i) / static_cast<double>(i + 1);
      tail += term;
    }
  } else {
    const double nd = static_cast<double>(n);
    std::vector<double> logs;
    logs.reserve(k + 1);
    for (std::uint64_t i = 0; i <= k; ++i) {
      const double id = static_cast<double>(i);
      logs.push_back(std::lgamma(nd + 1) - std::lgamma(id + 1) - std::lgamma(nd - id + 1) - nd * std::log(2.0));
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0;
    for (double l : logs) s += std::exp(l - mx);
    tail = std::exp(mx + std::log(s));
  }
  return std::min(1.0, 2 * tail);
}

CharCount parse_char_count(std::string_view s) {
  if (s == "codepoints") return CharCount::codepoints;
  if (s == "bytes") return CharCount::bytes;
  throw std::invalid_argument("unknown character count '" + std::string(s) + "' (codepoints, bytes)");
}

std::string_view to_string(CharCount c) { return c == CharCount::codepoints ? "codepoints" : "bytes"; }

CorpusStats dialogue_stats(const std::vector<DialogueSession>& corpus, CharCount count) {
  if (corpus.empty()) throw PreconditionError("corpus is empty");
  std::size_t dchars = 0, dturns = 0, pchars = 0, pturns = 0, turns = 0;
  for (const auto& s : corpus) {
    turns += s.turns.size();
    for (const auto& t : s.turns) {
      const std::size_t n = count == CharCount::codepoints ? text::codepoint_count(t.text) : t.text.size();
      if (t.role == Role::doctor) {
        dchars += n;
        ++dturns;
      } else {
        pchars += n;
        ++pturns;
      }
    }
  }
  CorpusStats st;
  st.sessions = corpus.size();
  if (dturns) st.avg_chars_doctor = static_cast<double>(dchars) / static_cast<double>(dturns);
  if (pturns) st.avg_chars_patient = static_cast<double>(pchars) / static_cast<double>(pturns);
  st.avg_turns = static_cast<double>(turns) / static_cast<double>(corpus.size());
  return st;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double intra_emr_diversity(const std::vector<std::set<std::string>>& sets) {
  if (sets.size() < 2) throw PreconditionError("intra-EMR diversity needs at least two keyword sets");
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t j = 0; j < sets.size(); ++j) {
    for (std::size_t k = j + 1; k < sets.size(); ++k) {
      sum += jaccard(sets[j], sets[k]);
      ++pairs;
    }
  }
  return 1.0 - sum / static_cast<double>(pairs);
}

double normalized_entropy(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw PreconditionError("entropy of an empty token list");
  const auto f = frequencies(tokens);
  if (f.size() <= 1) return 0.0;
  // Sum in a fixed order so the result does not depend on hash layout.
  std::vector<std::size_t> counts;
  counts.reserve(f.size());
  for (const auto& [_, c] : f) counts.push_back(c);
  std::sort(counts.begin(), counts.end());
  const double n = static_cast<double>(tokens.size());
  double h = 0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h / std::log2(static_cast<double>(f.size()));
}

double hapax_proportion(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw PreconditionError("hapax proportion of an empty token list");
  const auto f = frequencies(tokens);
  const auto once = std::count_if(f.begin(), f.end(), [](const auto& kv) { return kv.second == 1; });
  return static_cast<double>(once) / static_cast<double>(f.size());
}

double semantic_diversity(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2) throw PreconditionError("semantic diversity needs at least two vectors");
  const std::size_t dim = vectors.front().size();
  std::vector<double> norms;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim)
      throw PreconditionError("vector " + std::to_string(i) + " has dimension " + std::to_string(vectors[i].size()) +
                              ", expected " + std::to_string(dim));
    double sq = 0;
    for (double x : vectors[i]) sq += x * x;
    if (sq == 0) throw PreconditionError("vector " + std::to_string(i) + " is zero");
    norms.push_back(std::sqrt(sq));
  }
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < dim; ++d) dot += vectors[i][d] * vectors[j][d];
      sum += dot / (norms[i] * norms[j]);
      ++pairs;
    }
  }
  return 1.0 - sum / static_cast<double>(pairs);
}

HashingEmbedder::HashingEmbedder(std::size_t dim, text::TokenizerMode mode, std::uint64_t seed)
    : dim_(dim), mode_(mode), seed_(seed) {
  if (dim == 0) throw PreconditionError("embedding dimension must be positive");
}

std::vector<double> HashingEmbedder::embed(std::string_view s) const {
  std::vector<double> v(dim_, 0.0);
  for (const auto& t : text::tokenize(s, mode_)) v[fnv1a(t, splitmix64(seed_)) % dim_] += 1.0;
  return v;
}

std::set<std::string> extract_keywords(const DialogueSession& session, std::size_t k,
                                       const std::set<std::string>& stopwords, text::TokenizerMode mode) {
  if (k == 0) throw PreconditionError("keyword count must be >= 1");
  std::map<std::string, std::size_t> f;
  for (const auto& t : session.turns) {
    for (auto& tok : text::tokenize(t.text, mode)) {
      if (!stopwords.count(tok)) ++f[std::move(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(f.begin(), f.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.insert(ranked[i].first);
  return out;
}

DiversityReport compute_diversity(const std::vector<DialogueSession>& corpus, const DiversityOptions& opts) {
  if (corpus.empty()) throw PreconditionError("corpus is empty");
  DiversityReport r;

  std::map<std::string, std::vector<std::set<std::string>>> by_emr;
  for (const auto& s : corpus) by_emr[s.emr_id].push_back(extract_keywords(s, opts.keywords_k, opts.stopwords, opts.tokenizer));
  double sum = 0;
  for (const auto& [_, sets] : by_emr) {
    if (sets.size() < 2) continue;
    sum += intra_emr_diversity(sets);
    ++r.emr_groups;
  }
  if (r.emr_groups) r.intra_emr = sum / static_cast<double>(r.emr_groups);

  std::vector<std::string> tokens;
  for (const auto& s : corpus) {
    for (const auto& t : s.turns) {
      auto toks = text::tokenize(t.text, opts.tokenizer);
      tokens.insert(tokens.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
    }
  }
  if (tokens.empty()) throw PreconditionError("corpus has no tokens");
  r.tokens = tokens.size();
  r.types = frequencies(tokens).size();
  r.normalized_entropy = normalized_entropy(tokens);
  r.hapax = hapax_proportion(tokens);

  if (corpus.size() >= 2) {
    auto embedder = opts.embedder ? opts.embedder : std::make_shared<HashingEmbedder>(256, opts.tokenizer);
    std::vector<std::vector<double>> vecs;
    for (const auto& s : corpus) {
      std::string all;
      for (const auto& t : s.turns) {
        all += t.text;
        all += '\n';
      }
      vecs.push_back(embedder->embed(all));
    }
    r.semantic = semantic_diversity(vecs);
  }
  return r;
}

ordered_json to_json(const MetricReport& r) {
  auto opt = [](const auto& o) { return o ? ordered_json(*o) : ordered_json(nullptr); };
  ordered_json j;
  j["evaluated"] = opt(r.evaluated);
  j["subset_accuracy"] = opt(r.subset_accuracy);
  ordered_json labels = ordered_json::object();
  for (const auto& [d, p] : r.per_label)
    labels[std::string(to_string(d))] = ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
  j["per_label"] = labels;
  if (r.mcnemar) {
    j["mcnemar"] = ordered_json{{"comparison", r.mcnemar->comparison},
                                {"pairs", r.mcnemar->pairs},
                                {"b", r.mcnemar->b},
                                {"c", r.mcnemar->c},
                                {"p_value", r.mcnemar->p_value}};
  } else {
    j["mcnemar"] = nullptr;
  }
  if (r.corpus_stats) {
    j["corpus_stats"] = ordered_json{{"sessions", r.corpus_stats->sessions},
                                     {"avg_chars_doctor", r.corpus_stats->avg_chars_doctor},
                                     {"avg_chars_patient", r.corpus_stats->avg_chars_patient},
                                     {"avg_turns", r.corpus_stats->avg_turns}};
  } else {
    j["corpus_stats"] = nullptr;
  }
  if (r.diversity) {
    const auto& d = *r.diversity;
    j["diversity"] = ordered_json{{"intra_emr", opt(d.intra_emr)},
                                  {"normalized_entropy", d.normalized_entropy},
                                  {"hapax", d.hapax},
                                  {"semantic", opt(d.semantic)},
                                  {"emr_groups", d.emr_groups},
                                  {"tokens", d.tokens},
                                  {"types", d.types}};
  } else {
    j["diversity"] = nullptr;
  }
  return j;
}

}  // namespace psydial
