#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>
#include <vector>

#include "redcheck/decide.hpp"

namespace redcheck {

struct SearchBounds {
  std::size_t max_len = 5;
  std::vector<Value> values{-3, -2, -1, 0, 1, 2, 3};
  std::vector<Value> init_values{-1, 0, 1};
  std::size_t max_init = 200;
  std::size_t max_cases = 20'000'000;  // machine runs
  std::size_t jobs = 1;
};

struct OracleResult {
  std::optional<Witness> witness;
  bool exhausted = false;  // budget hit: "none" only means none among the cases tried
  std::size_t cases = 0;
};

// Words up to max_len in graded-lex order (by length, then lexicographically by value order).
inline std::vector<std::vector<Value>> words_upto(std::size_t max_len, const std::vector<Value>& values) {
  std::vector<Value> vs = values;
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  std::vector<std::vector<Value>> out{{}};
  std::size_t from = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::size_t to = out.size();
    for (std::size_t i = from; i < to; ++i)
      for (Value v : vs) {
        auto w = out[i];
        w.push_back(v);
        out.push_back(std::move(w));
      }
    from = to;
  }
  return out;
}

// All-zero first, then the rest of init_values^names in lex order, or a fixed-seed
// sample when that grid is larger than max_init.
inline std::vector<Valuation> init_points(const std::vector<std::string>& names, const SearchBounds& b) {
  std::vector<Valuation> out;
  std::set<std::vector<Value>> seen;
  auto push = [&](const std::vector<Value>& v) {
    if (out.size() >= b.max_init || !seen.insert(v).second) return;
    Valuation m;
    for (std::size_t i = 0; i < names.size(); ++i) m[names[i]] = v[i];
    out.push_back(std::move(m));
  };
  push(std::vector<Value>(names.size(), 0));
  if (b.init_values.empty()) return out;
  double grid = 1;
  for (std::size_t i = 0; i < names.size(); ++i) grid *= static_cast<double>(b.init_values.size());
  if (grid <= static_cast<double>(b.max_init)) {
    std::vector<std::size_t> idx(names.size(), 0);
    for (;;) {
      std::vector<Value> v(names.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = b.init_values[idx[i]];
      push(v);
      std::size_t i = names.size();
      while (i > 0 && ++idx[i - 1] == b.init_values.size()) idx[--i] = 0;
      if (i == 0) break;
    }
  } else {
    std::mt19937 rng(0);
    std::uniform_int_distribution<std::size_t> d(0, b.init_values.size() - 1);
    while (out.size() < b.max_init) {
      std::vector<Value> v(names.size());
      for (auto& x : v) x = b.init_values[d(rng)];
      push(v);
    }
  }
  return out;
}

using Runner = std::function<Outcome(const std::vector<Value>&, const Valuation&)>;

inline Runner program_runner(const ReducerProgram& p) {
  return [p](const std::vector<Value>& w, const Valuation& rho) { return interpret(p, w, rho); };
}

inline Runner snt_runner(const Snt& s) {
  return [s](const std::vector<Value>& w, const Valuation& rho) -> Outcome {
    auto o = run(s, w, valuation_from_names(s, rho));
    if (!o) return std::nullopt;
    return std::vector<Value>{*o};
  };
}

// Initial points of an SNT with linked variables made equal.
inline std::vector<Valuation> snt_init_points(const Snt& s, const SearchBounds& b) {
  std::vector<std::string> names = s.control;
  names.insert(names.end(), s.data.begin(), s.data.end());
  std::vector<Valuation> out;
  std::set<Valuation> seen;
  for (auto m : init_points(names, b)) {
    for (const auto& [x, y] : s.links)
      if (m.count(x)) m[y] = m[x];
    if (seen.insert(m).second) out.push_back(std::move(m));
  }
  return out;
}

namespace detail {

// Runs body(i) for every init point index, `jobs` at a time.
inline void parallel_points(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> ts;
  for (std::size_t t = 0; t < jobs; ++t)
    ts.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += jobs) body(i);
    });
  for (auto& t : ts) t.join();
}

// Caps the init points so that words * points stays within the budget.
inline std::size_t budget_points(std::size_t words, std::size_t points, const SearchBounds& b, OracleResult& r) {
  std::size_t fit = words == 0 ? points : std::max<std::size_t>(1, b.max_cases / words);
  if (fit < points) {
    r.exhausted = true;
    points = fit;
  }
  r.cases = words * points;
  return points;
}

struct Hit {
  std::size_t word = SIZE_MAX, init = SIZE_MAX;
  friend bool operator<(const Hit& a, const Hit& b) { return std::tie(a.word, a.init) < std::tie(b.word, b.init); }
};

}  // namespace detail

// First (word, rho0, sigma) in enumeration order whose outputs differ.
inline OracleResult oracle_commutative(const Runner& f, const std::vector<Valuation>& inits, const SearchBounds& b) {
  OracleResult r;
  auto words = words_upto(b.max_len, b.values);
  std::size_t n_init = detail::budget_points(words.size(), inits.size(), b, r);
  std::map<std::vector<Value>, std::size_t> index;
  for (std::size_t i = 0; i < words.size(); ++i) index.emplace(words[i], i);
  // words sharing a multiset
  std::vector<std::size_t> cls(words.size());
  std::map<std::vector<Value>, std::size_t> cls_id;
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto key = words[i];
    std::sort(key.begin(), key.end());
    cls[i] = cls_id.emplace(key, cls_id.size()).first->second;
  }
  std::vector<detail::Hit> best(n_init);
  detail::parallel_points(n_init, b.jobs, [&](std::size_t ii) {
    std::vector<Outcome> out(words.size());
    for (std::size_t w = 0; w < words.size(); ++w) out[w] = f(words[w], inits[ii]);
    std::vector<std::optional<Outcome>> first(cls_id.size());
    std::vector<bool> mixed(cls_id.size(), false);
    for (std::size_t w = 0; w < words.size(); ++w) {
      auto& fo = first[cls[w]];
      if (!fo)
        fo = out[w];
      else if (*fo != out[w])
        mixed[cls[w]] = true;
    }
    for (std::size_t w = 0; w < words.size(); ++w)
      if (mixed[cls[w]]) {
        best[ii] = {w, ii};
        return;
      }
  });
  auto hit = *std::min_element(best.begin(), best.end());
  if (hit.word == SIZE_MAX) return r;
  const auto& w = words[hit.word];
  const auto& rho = inits[hit.init];
  Outcome o1 = f(w, rho);
  std::vector<std::size_t> sigma(w.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = i;
  while (std::next_permutation(sigma.begin(), sigma.end())) {
    std::vector<Value> pw(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) pw[i] = w[sigma[i]];
    Outcome o2 = f(pw, rho);
    if (o2 != o1) {
      r.witness = Witness{w, sigma, pw, rho, o1, o2};
      return r;
    }
  }
  throw std::logic_error("oracle: mixed class without a differing permutation");
}

inline OracleResult oracle_commutative(const ReducerProgram& p, const SearchBounds& b = {}) {
  return oracle_commutative(program_runner(p), init_points(all_variables(p), b), b);
}

inline OracleResult oracle_commutative(const Snt& s, const SearchBounds& b = {}) {
  return oracle_commutative(snt_runner(s), snt_init_points(s, b), b);
}

namespace detail {

// First (word, rho0) in enumeration order accepted by `bad`.
inline OracleResult first_case(const std::vector<Valuation>& inits, const SearchBounds& b,
                               const std::function<std::optional<Witness>(const std::vector<Value>&, const Valuation&)>& bad) {
  OracleResult r;
  auto words = words_upto(b.max_len, b.values);
  std::size_t n_init = budget_points(words.size(), inits.size(), b, r);
  std::vector<Hit> best(n_init);
  std::vector<std::optional<Witness>> found(n_init);
  parallel_points(n_init, b.jobs, [&](std::size_t ii) {
    for (std::size_t w = 0; w < words.size(); ++w)
      if (auto wit = bad(words[w], inits[ii])) {
        best[ii] = {w, ii};
        found[ii] = std::move(wit);
        return;
      }
  });
  auto it = std::min_element(best.begin(), best.end());
  if (it != best.end() && it->word != SIZE_MAX) r.witness = found[it->init];
  return r;
}

}  // namespace detail

inline OracleResult oracle_equivalent(const Snt& a, const Snt& c, const SearchBounds& b = {}) {
  // variables of both machines, shared by name
  Snt both = a;
  for (const auto& x : c.control)
    if (!a.var(x)) both.control.push_back(x);
  for (const auto& y : c.data)
    if (!a.var(y)) both.data.push_back(y);
  both.links = a.links;
  both.links.insert(both.links.end(), c.links.begin(), c.links.end());
  auto fa = snt_runner(a), fc = snt_runner(c);
  return detail::first_case(snt_init_points(both, b), b,
                            [&](const std::vector<Value>& w, const Valuation& rho) -> std::optional<Witness> {
                              auto o1 = fa(w, rho), o2 = fc(w, rho);
                              if (o1 == o2) return std::nullopt;
                              return Witness{w, {}, {}, rho, o1, o2};
                            });
}

inline OracleResult oracle_equivalent(const ReducerProgram& p, const ReducerProgram& q, const SearchBounds& b = {}) {
  auto names = all_variables(p);
  for (const auto& v : all_variables(q))
    if (std::find(names.begin(), names.end(), v) == names.end()) names.push_back(v);
  auto fp = program_runner(p), fq = program_runner(q);
  return detail::first_case(init_points(names, b), b,
                            [&](const std::vector<Value>& w, const Valuation& rho) -> std::optional<Witness> {
                              auto o1 = fp(w, rho), o2 = fq(w, rho);
                              if (o1 == o2) return std::nullopt;
                              return Witness{w, {}, {}, rho, o1, o2};
                            });
}

inline OracleResult oracle_nonzero(const Snt& s, const SearchBounds& b = {}) {
  auto f = snt_runner(s);
  return detail::first_case(snt_init_points(s, b), b,
                            [&](const std::vector<Value>& w, const Valuation& rho) -> std::optional<Witness> {
                              auto o = f(w, rho);
                              if (!o || o->front() == 0) return std::nullopt;
                              return Witness{w, {}, {}, rho, o, std::nullopt};
                            });
}


// Best-effort concrete witnesses for a decided verdict. Returns false when the
// oracle contradicts the verdict.
inline bool attach_witness(Verdict& v, const OracleResult& r, bool witness_means_fails) {
  const Answer expect = witness_means_fails ? Answer::fails : Answer::holds;
  if (v.answer == Answer::unsupported) return true;
  if (r.witness && v.answer == expect) v.evidence.witness = r.witness;
  return !r.witness || v.answer == expect;
}

}  // namespace redcheck
