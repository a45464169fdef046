#pragma once

// Shared fixtures for the test binaries and the acceptance gate.

#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "redcheck/redcheck.hpp"

namespace support {

using namespace redcheck;

inline std::string slurp(const std::string& name) {
  std::ifstream in(std::string(REDCHECK_CORPUS) + "/" + name);
  if (!in) throw std::runtime_error("missing corpus file " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ReducerProgram load(const std::string& name) { return parse_program(slurp(name + ".red")); }

inline const std::vector<std::string> kLinear = {"max",   "sum",   "cnt",         "first",           "last",
                                                 "id",    "min",   "range",       "sum_above_first", "max_count",
                                                 "second", "sum_minus_max", "sum_pair"};

inline const std::vector<std::string> kPrograms = [] {
  auto v = kLinear;
  v.insert(v.end(), {"avg", "sd", "mad"});
  return v;
}();

inline Snt smax() { return parse_snt(slurp("smax_prime.snt")); }

// S'max transitions by role: the handle and the two cycles.
struct Smax {
  Snt s = smax();
  std::size_t h = 0, c1 = 0, c2 = 0, end = 0;
  TotalPreorder one{std::vector<std::size_t>{0}};

  Smax() {
    for (std::size_t i = 0; i < s.transitions.size(); ++i) {
      const auto& t = s.transitions[i];
      if (t.end)
        end = i;
      else if (t.src == 0)
        h = i;
      else if (detail::cur_relation(t.guard, 0) == Rel::lt)
        c1 = i;
      else
        c2 = i;
    }
  }
};

// The single normalized S'max variant and the multi-lasso whose handle is `cur = x1`.
struct SmaxLasso {
  NormalizedSnt n;
  MultiLasso ml;
  LassoAnalysis a;
  std::size_t c1 = 0, c2 = 0;  // cycle indices within the bundle

  SmaxLasso() {
    auto vs = normalize(smax());
    if (vs.size() != 1) throw std::logic_error("S'max has one control variable");
    n = vs.front();
    for (const auto& m : classify(n.snt)) {
      const auto& h = n.snt.transitions[m.stages.front().handle.front()];
      if (detail::cur_relation(h.guard, 0) == Rel::eq) ml = m;
    }
    a = analyze_lasso(n, ml);
    const auto& bundle = ml.stages.front().bundle;
    for (std::size_t i = 0; i < bundle.size(); ++i)
      (detail::cur_relation(n.snt.transitions[bundle[i]].guard, 0) == Rel::lt ? c1 : c2) = i;
  }

  // Abs of H followed by the given cycles.
  Abs abs_of(const std::vector<std::size_t>& cycles) const {
    const auto& st = a.stages.front();
    const std::size_t k = st.handle.num_control(), l = a.b.size();
    Abs x = core_tuples(initial_core(k, l));
    for (const auto& v : initial_others(a)) x.insert({k + 1, v});
    x = apply_abs(x, st.handle, false);
    for (std::size_t c : cycles) x = apply_abs(x, st.cycles[c], true);
    return x;
  }
};

inline Abs abs_set(std::initializer_list<std::pair<std::size_t, std::vector<int>>> ts) {
  Abs out;
  for (const auto& [tag, c] : ts) {
    CoeffVec v;
    for (int x : c) v.push_back(x);
    out.insert({tag, v});
  }
  return out;
}

// A random generalized lasso: handle, one or two junctions with up to three
// self-loops, an end transition. k <= 2 control and l <= 3 data variables.
inline Snt random_lasso(std::mt19937& rng, const std::string& name = "rnd") {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const std::size_t k = static_cast<std::size_t>(pick(1, 2)), l = static_cast<std::size_t>(pick(1, 3));
  const std::size_t junctions = static_cast<std::size_t>(pick(1, 2));
  Snt s;
  s.name = name;
  for (std::size_t x = 0; x < k; ++x) s.control.push_back("x" + std::to_string(x + 1));
  for (std::size_t j = 0; j < l; ++j) s.data.push_back("y" + std::to_string(j + 1));
  for (std::size_t q = 0; q < junctions + 2; ++q) s.states.push_back("q" + std::to_string(q));
  s.initial = 0;
  s.output.assign(s.states.size(), std::nullopt);

  auto data_updates = [&](Transition& t, bool reads_cur) {
    for (std::size_t j = 0; j < l; ++j) {
      int mode = pick(0, 2);  // keep, accumulate, overwrite
      if (mode == 0) continue;
      Expr e = Expr::of_const(pick(-2, 2));
      for (std::size_t x = 0; x < k; ++x) e.add(VarRef::ctrl(x), pick(-2, 2));
      if (reads_cur) e.add(VarRef::cur(), pick(-2, 3));
      t.data.push_back(DataUpdate{j, mode == 1, e});
    }
  };

  // handle
  Transition h;
  h.src = 0;
  h.dst = 1;
  for (std::size_t x = 0; x < k; ++x) {
    if (pick(0, 2) == 0) h.guard.push_back({VarRef::cur(), static_cast<Rel>(pick(0, 2)), VarRef::ctrl(x)});
    if (pick(0, 1) == 1) h.ctrl.push_back(CtrlUpdate{x, VarRef::cur()});
  }
  data_updates(h, true);
  s.transitions.push_back(h);

  for (std::size_t jn = 1; jn <= junctions; ++jn) {
    // per control variable: 0 frozen, 1 tracks the maximum, 2 tracks the minimum
    std::vector<int> mode(k);
    for (auto& m : mode) m = pick(0, 2);
    std::set<std::vector<int>> used;
    const int cycles = pick(jn == 1 ? 1 : 0, 3);
    for (int c = 0; c < cycles; ++c) {
      std::vector<int> rel(k);
      for (auto& r : rel) r = pick(0, 2);
      if (!used.insert(rel).second) continue;
      Transition t;
      t.src = t.dst = jn;
      for (std::size_t x = 0; x < k; ++x) {
        Rel r = static_cast<Rel>(rel[x]);
        t.guard.push_back({VarRef::cur(), r, VarRef::ctrl(x)});
        if ((mode[x] == 1 && r == Rel::gt) || (mode[x] == 2 && r == Rel::lt)) t.ctrl.push_back(CtrlUpdate{x, VarRef::cur()});
      }
      data_updates(t, true);
      s.transitions.push_back(t);
    }
    if (jn < junctions) {
      Transition m;
      m.src = jn;
      m.dst = jn + 1;
      // a guard no cycle of this junction takes keeps the machine deterministic
      std::vector<int> rel(k);
      bool free = false;
      for (int attempt = 0; attempt < 50 && !free; ++attempt) {
        for (auto& r : rel) r = pick(0, 2);
        free = !used.count(rel);
      }
      if (!free) continue;
      for (std::size_t x = 0; x < k; ++x) m.guard.push_back({VarRef::cur(), static_cast<Rel>(rel[x]), VarRef::ctrl(x)});
      data_updates(m, true);
      s.transitions.push_back(m);
    }
  }
  // the end transition leaves from the last reachable junction
  std::size_t last = 1;
  for (const auto& t : s.transitions) last = std::max(last, t.dst);
  Transition e;
  e.src = last;
  e.dst = s.states.size() - 1;
  e.end = true;
  data_updates(e, false);
  s.transitions.push_back(e);
  Expr o = Expr::of_const(pick(-1, 1));
  for (std::size_t x = 0; x < k; ++x) o.add(VarRef::ctrl(x), pick(-1, 1));
  for (std::size_t j = 0; j < l; ++j) o.add(VarRef::data(j), pick(-2, 2));
  s.output.back() = o;
  return prune_unreachable(s);
}

struct Machine {
  std::string name;
  Snt snt;
};

// Translated corpus programs (restricted to length >= 2), their swap and rotate
// derivatives and difference products, S'max, and `randoms` random lassos.
inline std::vector<Machine> corpus_machines(std::size_t randoms = 10, bool products = true) {
  std::vector<Machine> out;
  for (const auto& name : kLinear) {
    Snt r = restrict_min_length(program_to_snt(load(name)));
    Snt sw = build_swap_snt(r), ro = build_rotate_snt(r);
    out.push_back({name, r});
    out.push_back({name + "/swap", sw});
    out.push_back({name + "/rotate", ro});
    if (products) {
      out.push_back({name + "/x-swap", product(r, sw)});
      out.push_back({name + "/x-rotate", product(r, ro)});
    }
  }
  out.push_back({"smax_prime", smax()});
  out.push_back({"max.snt", parse_snt(slurp("max.snt"))});
  std::mt19937 rng(2024);
  for (std::size_t i = 0; i < randoms; ++i) {
    std::string name = "rnd" + std::to_string(i);
    out.push_back({name, random_lasso(rng, name)});
  }
  return out;
}

// Paths from q of exactly `len` transitions (an end transition may only close a path).
inline void paths_from(const Snt& s, std::size_t q, std::size_t len, std::vector<std::size_t>& cur,
                       const std::function<void(const std::vector<std::size_t>&)>& f) {
  if (cur.size() == len) {
    f(cur);
    return;
  }
  if (!cur.empty() && s.transitions[cur.back()].end) return;
  for (std::size_t t : s.outgoing(q)) {
    cur.push_back(t);
    paths_from(s, s.transitions[t].dst, len, cur, f);
    cur.pop_back();
  }
}

inline std::vector<std::size_t> random_path(const Snt& s, std::size_t q, std::size_t len, std::mt19937& rng) {
  std::vector<std::size_t> p;
  while (p.size() < len) {
    auto out = s.outgoing(q);
    if (out.empty()) break;
    std::uniform_int_distribution<std::size_t> d(0, out.size() - 1);
    std::size_t t = out[d(rng)];
    p.push_back(t);
    if (s.transitions[t].end) break;
    q = s.transitions[t].dst;
  }
  return p;
}

inline BigInt value_of(const LinExpr& e, const std::function<BigInt(const Atom&)>& atom) {
  BigInt r = 0;
  for (const auto& [a, c] : e.terms) {
    if (c.has_counter()) throw std::runtime_error("counter in a concrete summary");
    r += c.c0 * atom(a);
  }
  return r;
}

// Positions (symbol numbers) of the fresh classes, in fresh index order.
inline std::vector<std::size_t> fresh_symbols(const PathSummary& p, std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& cls : p.equiv)
    if (cls.front() > k) out.push_back(cls.front() - 1);
  return out;
}

struct SoundStats {
  std::size_t samples = 0;
  std::vector<std::string> failures;
};

// The summary evaluated on concrete witnesses equals the driven run, on `samples` witnesses.
inline void check_sound(const Snt& s, const std::vector<std::size_t>& path, const TotalPreorder& start,
                        std::mt19937& rng, int samples, SoundStats& st) {
  auto fail = [&](const std::string& why) { st.failures.push_back(s.name + ": " + why); };
  PathSummary sum;
  try {
    sum = summarize_path(s, path, start);
  } catch (const StructureError&) {
    if (guard_sat(s.num_control() + 64, path_constraints(s, path, start).atoms)) fail("feasible path rejected");
    return;
  }
  const std::size_t k = s.num_control();
  auto pc = path_constraints(s, path, start);
  auto fresh = fresh_symbols(sum, k);
  if (fresh.size() != sum.fresh_count) return fail("fresh class count");
  std::uniform_int_distribution<Value> dv(-20, 20);
  for (int i = 0; i < samples; ++i) {
    auto vals = path_witness(pc, rng, dv(rng));
    if (!vals) return fail("no witness for a feasible path");
    SntValuation rho0{std::vector<Value>(vals->begin(), vals->begin() + static_cast<std::ptrdiff_t>(k)),
                      std::vector<Value>(s.num_data())};
    for (auto& y : rho0.data) y = dv(rng);
    std::vector<Value> word(vals->begin() + static_cast<std::ptrdiff_t>(k), vals->end());
    // drive the path directly: run_trace would stop at the word's end
    SntValuation v = rho0;
    for (std::size_t step = 0, pos = 0; step < path.size(); ++step) {
      const auto& t = s.transitions[path[step]];
      std::optional<Value> cur;
      if (!t.end) cur = word[pos++];
      if (!enabled(t, v, cur)) return fail("witness does not follow the path");
      v = apply(t, v, cur);
    }
    auto atom = [&](const Atom& a) -> BigInt {
      switch (a.kind) {
        case AtomKind::constant: return 1;
        case AtomKind::init_ctrl: return rho0.control[a.index];
        case AtomKind::init_data: return rho0.data[a.index];
        case AtomKind::fresh: return (*vals)[fresh.at(a.index)];
      }
      return 0;
    };
    ++st.samples;
    for (std::size_t x = 0; x < k; ++x)
      if (atom(sum.control[x]) != BigInt(v.control[x])) return fail("control value differs");
    for (std::size_t j = 0; j < s.num_data(); ++j)
      if (value_of(sum.data[j], atom) != BigInt(v.data[j])) return fail("data value differs");
  }
}

}  // namespace support
