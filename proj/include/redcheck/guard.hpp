#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "redcheck/core.hpp"

namespace redcheck {

// Order atom between two abstract symbols 0..n-1.
struct SymAtom {
  std::size_t lhs = 0;
  Rel rel = Rel::eq;
  std::size_t rhs = 0;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t size() const { return parent_.size(); }
  std::size_t add() {
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // The smaller root survives so representatives stay minimal.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Satisfiable over the integers iff the strict-order graph on =-classes is acyclic.
inline bool guard_sat(std::size_t n, const std::vector<SymAtom>& atoms) {
  UnionFind uf(n);
  for (const auto& a : atoms)
    if (a.rel == Rel::eq) uf.unite(a.lhs, a.rhs);
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& a : atoms) {
    if (a.rel == Rel::eq) continue;
    std::size_t l = uf.find(a.lhs), r = uf.find(a.rhs);
    if (l == r) return false;
    if (a.rel == Rel::lt)
      succ[l].push_back(r);
    else
      succ[r].push_back(l);
  }
  std::vector<int> color(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (color[s]) continue;
    stack.push_back({s, 0});
    color[s] = 1;
    while (!stack.empty()) {
      auto& [v, i] = stack.back();
      if (i < succ[v].size()) {
        std::size_t w = succ[v][i++];
        if (color[w] == 1) return false;
        if (color[w] == 0) {
          color[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        color[v] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

// Symbol layout for guards over X+: cur is 0, control variable i is i+1.
inline std::size_t guard_symbol(VarRef v) { return v.is_cur() ? 0 : v.index + 1; }

inline std::vector<SymAtom> to_sym_atoms(const Guard& g) {
  std::vector<SymAtom> out;
  out.reserve(g.size());
  for (const auto& a : g) out.push_back({guard_symbol(a.lhs), a.rel, guard_symbol(a.rhs)});
  return out;
}

inline bool guard_sat(std::size_t num_control, const Guard& g) {
  return guard_sat(num_control + 1, to_sym_atoms(g));
}

inline bool guard_sat(std::size_t num_control, const Guard& a, const Guard& b) {
  Guard both = a;
  both.insert(both.end(), b.begin(), b.end());
  return guard_sat(num_control, both);
}

// Evaluates a guard on concrete values; value(v) gives cur and control values.
template <typename F>
bool guard_holds(const Guard& g, F&& value) {
  for (const auto& a : g)
    if (!rel_holds(a.rel, value(a.lhs), value(a.rhs))) return false;
  return true;
}

}  // namespace redcheck
