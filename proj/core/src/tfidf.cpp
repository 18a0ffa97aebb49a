#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "trident/rule_clustering.hpp"

namespace trident::clustering {

std::string normalize_name(std::string_view name, bool* fallback) {
  constexpr std::string_view kPrefix = "rule_";
  std::string out(name);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::string stripped = out;
  if (stripped.compare(0, kPrefix.size(), kPrefix) == 0) stripped.erase(0, kPrefix.size());
  if (fallback) *fallback = stripped.empty();
  return stripped.empty() ? out : stripped;
}

std::vector<std::string> tokenize_name(std::string_view name) {
  std::vector<std::string> tokens;
  std::string current;
  int kind = 0;  // 1 alpha, 2 digit
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : name) {
    int k = std::isdigit(c) ? 2 : (std::isalpha(c) || c >= 0x80) ? 1 : 0;
    if (k == 0) {
      flush();
    } else if (k != kind) {
      flush();
    }
    if (k) current += static_cast<char>(c);
    kind = k;
  }
  flush();
  return tokens;
}

double SparseVector::dot(const SparseVector& other) const {
  double sum = 0;
  auto a = entries.begin(), b = other.entries.begin();
  while (a != entries.end() && b != other.entries.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      sum += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return sum;
}

double SparseVector::norm() const {
  double sum = 0;
  for (const auto& [_, w] : entries) sum += w * w;
  return std::sqrt(sum);
}

double cosine_distance(const SparseVector& a, const SparseVector& b) {
  return std::max(0.0, 1.0 - a.dot(b));
}

namespace {

std::map<std::string, int> raw_features(const std::string& name) {
  std::map<std::string, int> counts;
  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= name.size(); ++i) ++counts["c:" + name.substr(i, n)];
  }
  auto tokens = tokenize_name(name);
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = "t:" + tokens[i];
      for (std::size_t k = 1; k < n; ++k) gram += " " + tokens[i + k];
      ++counts[gram];
    }
  }
  if (counts.empty()) counts["w:" + name] = 1;
  return counts;
}

}  // namespace

std::vector<NameVector> vectorize(const std::vector<std::string>& names, Vocabulary* vocabulary) {
  std::vector<std::map<std::string, int>> docs;
  docs.reserve(names.size());
  std::map<std::string, std::size_t> df;
  for (const auto& name : names) {
    docs.push_back(raw_features(name));
    for (const auto& [f, _] : docs.back()) ++df[f];
  }

  Vocabulary vocab;
  std::map<std::string, std::uint32_t> ids;
  const double n = static_cast<double>(names.size());
  for (const auto& [f, count] : df) {
    ids.emplace(f, static_cast<std::uint32_t>(vocab.features.size()));
    vocab.features.push_back(f);
    vocab.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }

  std::vector<NameVector> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    NameVector v{names[i], {}};
    for (const auto& [f, tf] : docs[i]) {
      auto id = ids.at(f);
      v.features.entries.emplace_back(id, tf * vocab.idf[id]);
    }
    double norm = v.features.norm();
    for (auto& [_, w] : v.features.entries) w /= norm;
    out.push_back(std::move(v));
  }
  if (vocabulary) *vocabulary = std::move(vocab);
  return out;
}

}  // namespace trident::clustering
