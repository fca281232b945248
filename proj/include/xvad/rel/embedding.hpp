#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xvad/core/log.hpp"
#include "xvad/core/random.hpp"

namespace xvad {

/// Token -> fixed-dimension vector lookup. Out-of-vocabulary tokens are
/// reported via nullopt, never silently zeroed.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::optional<std::vector<double>> lookup(const std::string& token) const = 0;
  virtual Index dim() const = 0;
  virtual std::string source() const = 0;
};

/// Fixed in-memory table, used by tests and tiny demos.
class TableEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {
    require<ConfigError>(!table_.empty(), "embedding table is empty");
    dim_ = static_cast<Index>(table_.begin()->second.size());
    for (const auto& [word, vec] : table_)
      require<ConfigError>(static_cast<Index>(vec.size()) == dim_,
                           "embedding table: inconsistent dimension for '", word, "'");
  }

  std::optional<std::vector<double>> lookup(const std::string& token) const override {
    const auto it = table_.find(token);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }
  Index dim() const override { return dim_; }
  std::string source() const override { return "table"; }

 private:
  std::map<std::string, std::vector<double>> table_;
  Index dim_ = 0;
};

/// Deterministic fallback provider: every token maps to a unit vector seeded
/// from its hash. Useful to exercise the tooling without a trained model;
/// similarities carry no semantics.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(Index dim = 32) : dim_(dim) {}

  std::optional<std::vector<double>> lookup(const std::string& token) const override {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    Rng rng(h);
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  }
  Index dim() const override { return dim_; }
  std::string source() const override { return "hash"; }

 private:
  Index dim_;
};

/// Reader for the common binary word-vector format ("<count> <dim>\n" header,
/// then '<word> ' followed by dim float32 values per entry). Only the
/// requested vocabulary is kept, so multi-gigabyte files stream through.
class Word2VecEmbeddingProvider : public EmbeddingProvider {
 public:
  Word2VecEmbeddingProvider(const std::filesystem::path& path,
                            const std::set<std::string>& vocabulary) {
    std::ifstream in(path, std::ios::binary);
    require<IoError>(in.good(), "cannot open embedding file '", path.string(), "'");
    long long count = 0, dim = 0;
    in >> count >> dim;
    require<IoError>(count > 0 && dim > 0, "'", path.string(),
                     "' does not look like a binary word-vector file");
    in.get();  // single separator after the header
    dim_ = dim;
    std::vector<float> buf(static_cast<std::size_t>(dim));
    for (long long i = 0; i < count && !vocabulary.empty(); ++i) {
      std::string word;
      char c;
      while (in.get(c) && c != ' ' && c != '\n') word.push_back(c);
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(sizeof(float) * dim));
      if (!in.good()) break;
      std::string lowered = word;
      std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      if (vocabulary.count(lowered) && !table_.count(lowered))
        table_.emplace(lowered, std::vector<double>(buf.begin(), buf.end()));
      if (table_.size() == vocabulary.size()) break;
    }
  }

  std::optional<std::vector<double>> lookup(const std::string& token) const override {
    const auto it = table_.find(token);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }
  Index dim() const override { return dim_; }
  std::string source() const override { return "word2vec"; }

 private:
  std::map<std::string, std::vector<double>> table_;
  Index dim_ = 0;
};

/// Non-empty list of labels, lower-cased; each label may hold several words.
struct LabelSet {
  std::vector<std::string> labels;

  static LabelSet from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require<IoError>(in.good(), "cannot open label list '", path.string(), "'");
    LabelSet set;
    std::string line;
    while (std::getline(in, line)) {
      std::string lowered;
      for (unsigned char c : line)
        lowered.push_back(static_cast<char>(std::tolower(c)));
      const auto b = lowered.find_first_not_of(" \t\r");
      const auto e = lowered.find_last_not_of(" \t\r");
      if (b == std::string::npos) continue;
      set.labels.push_back(lowered.substr(b, e - b + 1));
    }
    require<IoError>(!set.labels.empty(), "label list '", path.string(), "' is empty");
    return set;
  }

  /// Every whitespace token across all labels, for subset loading.
  std::set<std::string> vocabulary() const {
    std::set<std::string> vocab;
    for (const auto& label : labels) {
      std::istringstream in(label);
      std::string tok;
      while (in >> tok) vocab.insert(tok);
    }
    return vocab;
  }
};

/// Mean of the token vectors of a (possibly multi-word) label. Unknown tokens
/// are dropped with a warning; a label with no known token is an error.
inline std::vector<double> embed_label(const std::string& label,
                                       const EmbeddingProvider& provider) {
  std::istringstream in(label);
  std::string tok;
  std::vector<double> acc(static_cast<std::size_t>(provider.dim()), 0.0);
  int found = 0;
  while (in >> tok) {
    const auto vec = provider.lookup(tok);
    if (!vec) {
      log_warn("token '" + tok + "' of label '" + label + "' not in the embedding vocabulary");
      continue;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*vec)[i];
    ++found;
  }
  require(found > 0, "no token of label '", label, "' is in the embedding vocabulary");
  for (auto& v : acc) v /= found;
  return acc;
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, "cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Mean absolute cosine similarity over all label pairs, in [0, 1]; the full
/// pairwise matrix comes along for reporting.
struct RelevancyResult {
  double mean_abs_cos = 0.0;
  std::vector<std::vector<double>> pairwise;  // |P| x |Q| absolute cosines
};

inline RelevancyResult mean_abs_cos_sim(const LabelSet& p, const LabelSet& q,
                                        const EmbeddingProvider& provider) {
  require(!p.labels.empty() && !q.labels.empty(), "mean_abs_cos_sim: empty label set");
  std::vector<std::vector<double>> embed_p, embed_q;
  for (const auto& label : p.labels) embed_p.push_back(embed_label(label, provider));
  for (const auto& label : q.labels) embed_q.push_back(embed_label(label, provider));
  RelevancyResult result;
  result.pairwise.assign(embed_p.size(), std::vector<double>(embed_q.size(), 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < embed_p.size(); ++i)
    for (std::size_t j = 0; j < embed_q.size(); ++j) {
      const double c = std::abs(cosine_similarity(embed_p[i], embed_q[j]));
      result.pairwise[i][j] = c;
      total += c;
    }
  result.mean_abs_cos = total / static_cast<double>(embed_p.size() * embed_q.size());
  return result;
}

}  // namespace xvad
