#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guis/action.hpp"
#include "guis/error.hpp"
#include "json.hpp"

namespace guis {

struct CaseStep {
  std::string call;
  std::optional<std::string> note;
  friend bool operator==(const CaseStep&, const CaseStep&) = default;
};

struct TaskCase {
  std::string app;
  std::string task;
  std::vector<CaseStep> steps;
  friend bool operator==(const TaskCase&, const TaskCase&) = default;
};

class InvalidCase : public Error {
 public:
  InvalidCase(std::size_t index, const std::string& reason)
      : Error("invalid case " + std::to_string(index) + ": " + reason), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

inline void to_json(nlohmann::json& j, const TaskCase& c) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : c.steps)
    steps.push_back({{"call", s.call}, {"note", s.note ? nlohmann::json(*s.note) : nlohmann::json(nullptr)}});
  j = nlohmann::json{{"app", c.app}, {"task", c.task}, {"steps", steps}};
}

inline void from_json(const nlohmann::json& j, TaskCase& c) {
  c.app = j.value("app", std::string());
  c.task = j.at("task").get<std::string>();
  c.steps.clear();
  for (const auto& s : j.at("steps")) {
    CaseStep step{s.at("call").get<std::string>(), std::nullopt};
    if (auto it = s.find("note"); it != s.end() && !it->is_null()) step.note = it->get<std::string>();
    c.steps.push_back(std::move(step));
  }
}

// JSON Lines, one case per non-blank line.
inline std::vector<TaskCase> read_cases_jsonl(std::istream& in) {
  std::vector<TaskCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      cases.push_back(nlohmann::json::parse(line).get<TaskCase>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("case db line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cases;
}

/// Lowercase alphanumeric runs.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct CaseHit {
  std::size_t index = 0;
  double similarity = 0.0;
  TaskCase task_case;
};

// Anything that can find the most similar solved tasks.
class CaseRetriever {
 public:
  virtual ~CaseRetriever() = default;
  virtual std::vector<CaseHit> query(std::string_view task, std::size_t k) const = 0;
};

// Similarities closer than this are treated as ties and ordered by index.
inline constexpr double kSimilarityTie = 1e-12;

/// TF-IDF index over task descriptions: raw term counts, smoothed idf
/// ln((1+N)/(1+df)) + 1, L2-normalized sparse vectors.
class CaseIndex final : public CaseRetriever {
 public:
  using SparseVector = std::vector<std::pair<std::size_t, double>>;  // sorted by dimension

  CaseIndex() = default;

  static CaseIndex build(std::vector<TaskCase> cases) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases[i];
      if (trim(c.task).empty()) throw InvalidCase(i, "empty task");
      if (c.steps.empty()) throw InvalidCase(i, "no steps");
      for (const auto& s : c.steps) {
        try {
          (void)parse_call(s.call);
        } catch (const CallError& e) {
          throw InvalidCase(i, e.what());
        }
      }
    }

    CaseIndex index;
    std::vector<std::vector<std::string>> tokens;
    for (const auto& c : cases) {
      tokens.push_back(tokenize(c.task));
      for (const auto& t : tokens.back()) index.vocabulary_.emplace(t, 0);
    }
    std::size_t dim = 0;
    for (auto& [token, d] : index.vocabulary_) d = dim++;

    std::vector<std::size_t> df(dim, 0);
    for (const auto& ts : tokens) {
      std::vector<std::size_t> seen;
      for (const auto& t : ts) seen.push_back(index.vocabulary_.at(t));
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (auto d : seen) ++df[d];
    }
    const double n = static_cast<double>(cases.size());
    index.idf_.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      index.idf_[d] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[d]))) + 1.0;

    for (const auto& ts : tokens) index.vectors_.push_back(index.vectorize(ts));
    index.cases_ = std::move(cases);
    return index;
  }

  std::vector<CaseHit> query(std::string_view task, std::size_t k) const override {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    const SparseVector q = vectorize(tokenize(task));
    std::vector<CaseHit> hits;
    hits.reserve(cases_.size());
    for (std::size_t i = 0; i < cases_.size(); ++i) hits.push_back({i, dot(q, vectors_[i]), {}});
    std::stable_sort(hits.begin(), hits.end(), [](const CaseHit& a, const CaseHit& b) {
      if (std::abs(a.similarity - b.similarity) > kSimilarityTie) return a.similarity > b.similarity;
      return a.index < b.index;
    });
    if (hits.size() > k) hits.resize(k);
    for (auto& h : hits) h.task_case = cases_[h.index];
    return hits;
  }

  const std::vector<TaskCase>& cases() const noexcept { return cases_; }
  const std::map<std::string, std::size_t>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  const std::vector<SparseVector>& vectors() const noexcept { return vectors_; }

  static double dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i].first == b[j].first)
        s += a[i++].second * b[j++].second;
      else if (a[i].first < b[j].first)
        ++i;
      else
        ++j;
    }
    return s;
  }

 private:
  // Out-of-vocabulary tokens are dropped; an empty result is the zero vector.
  SparseVector vectorize(const std::vector<std::string>& tokens) const {
    std::map<std::size_t, double> tf;
    for (const auto& t : tokens)
      if (auto it = vocabulary_.find(t); it != vocabulary_.end()) tf[it->second] += 1.0;
    SparseVector v;
    double norm = 0.0;
    for (const auto& [d, count] : tf) {
      const double w = count * idf_[d];
      v.emplace_back(d, w);
      norm += w * w;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (auto& [d, w] : v) w /= norm;
    return v;
  }

  std::vector<TaskCase> cases_;
  std::map<std::string, std::size_t> vocabulary_;
  std::vector<double> idf_;
  std::vector<SparseVector> vectors_;
};

}  // namespace guis
