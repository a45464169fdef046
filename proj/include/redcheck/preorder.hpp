#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "redcheck/core.hpp"

namespace redcheck {

// Total preorder on n elements stored as dense ranks: i <= j iff rank[i] <= rank[j].
class TotalPreorder {
 public:
  TotalPreorder() = default;
  explicit TotalPreorder(std::vector<std::size_t> ranks) : rank_(std::move(ranks)) { normalize(); }

  static TotalPreorder from_values(const std::vector<Value>& vals) {
    std::vector<Value> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> r(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
      r[i] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), vals[i]) - sorted.begin());
    return TotalPreorder(r);
  }

  std::size_t size() const { return rank_.size(); }
  std::size_t rank(std::size_t i) const { return rank_[i]; }
  const std::vector<std::size_t>& ranks() const { return rank_; }
  std::size_t class_count() const { return classes_; }

  bool leq(std::size_t i, std::size_t j) const { return rank_[i] <= rank_[j]; }
  bool equiv(std::size_t i, std::size_t j) const { return rank_[i] == rank_[j]; }
  Rel relation(std::size_t i, std::size_t j) const {
    return rank_[i] == rank_[j] ? Rel::eq : (rank_[i] < rank_[j] ? Rel::lt : Rel::gt);
  }

  // Minimal index of the class of i.
  std::size_t rep(std::size_t i) const {
    for (std::size_t j = 0; j < rank_.size(); ++j)
      if (rank_[j] == rank_[i]) return j;
    return i;
  }
  std::vector<std::size_t> class_members(std::size_t rank) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < rank_.size(); ++j)
      if (rank_[j] == rank) out.push_back(j);
    return out;
  }
  // Representatives ordered by increasing index.
  std::vector<std::size_t> reps() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < rank_.size(); ++j)
      if (rep(j) == j) out.push_back(j);
    return out;
  }

  bool satisfied_by(const std::vector<Value>& vals) const { return from_values(vals) == *this; }

  friend bool operator==(const TotalPreorder& a, const TotalPreorder& b) { return a.rank_ == b.rank_; }
  friend bool operator<(const TotalPreorder& a, const TotalPreorder& b) { return a.rank_ < b.rank_; }

  std::string to_string(const std::vector<std::string>& names) const {
    std::string s;
    for (std::size_t r = 0; r < classes_; ++r) {
      if (r) s += " < ";
      auto m = class_members(r);
      if (m.size() > 1) s += "{";
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) s += ",";
        s += names[m[i]];
      }
      if (m.size() > 1) s += "}";
    }
    return s;
  }

 private:
  std::vector<std::size_t> rank_;
  std::size_t classes_ = 0;

  void normalize() {
    std::vector<std::size_t> used = rank_;
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (auto& r : rank_) r = static_cast<std::size_t>(std::lower_bound(used.begin(), used.end(), r) - used.begin());
    classes_ = used.size();
  }
};

// All total preorders on n elements (ordered set partitions), in a fixed order.
inline std::vector<TotalPreorder> all_preorders(std::size_t n) {
  std::vector<TotalPreorder> out;
  std::vector<std::size_t> r(n, 0);
  // ranks as words over [0,n) whose used letters form a prefix 0..m-1
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == n) {
      std::vector<std::size_t> used = r;
      std::sort(used.begin(), used.end());
      used.erase(std::unique(used.begin(), used.end()), used.end());
      if (used.empty() || used.back() + 1 == used.size()) out.emplace_back(r);
      return;
    }
    for (std::size_t v = 0; v < std::max<std::size_t>(n, 1); ++v) {
      r[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace redcheck
