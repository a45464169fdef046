#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "redcheck/symbolic.hpp"
#include "redcheck/transforms.hpp"

namespace redcheck {

enum class Answer : std::uint8_t { holds, fails, unsupported };

inline const char* answer_text(Answer a) {
  switch (a) {
    case Answer::holds: return "HOLDS";
    case Answer::fails: return "FAILS";
    case Answer::unsupported: return "UNSUPPORTED";
  }
  return "?";
}

struct Witness {
  std::vector<Value> word;
  std::vector<std::size_t> sigma;  // commutativity only: permuted[i] = word[sigma[i]]
  std::vector<Value> permuted;
  std::map<std::string, Value> init;
  std::optional<std::vector<Value>> out1, out2;  // one value, or the tuple of an uninterpreted return

  friend bool operator==(const Witness& a, const Witness& b) {
    return a.word == b.word && a.sigma == b.sigma && a.permuted == b.permuted && a.init == b.init && a.out1 == b.out1 && a.out2 == b.out2;
  }
};

struct Evidence {
  std::string step;        // "I", "II", "III" or a structural constraint
  std::string multilasso;  // e.g. "H C1" path of the multi-lasso
  std::string scheme;
  std::string tuple;
  std::string detail;
  std::optional<Witness> witness;

  friend bool operator==(const Evidence& a, const Evidence& b) {
    return a.step == b.step && a.multilasso == b.multilasso && a.scheme == b.scheme && a.tuple == b.tuple &&
           a.detail == b.detail && a.witness == b.witness;
  }
};

struct Verdict {
  std::string property;
  Answer answer = Answer::holds;
  Evidence evidence;
  bool sound_incomplete = false;
  std::vector<std::pair<std::string, Verdict>> parts;
  std::vector<std::string> explain;

  friend bool operator==(const Verdict& a, const Verdict& b) {
    return a.property == b.property && a.answer == b.answer && a.evidence == b.evidence &&
           a.sound_incomplete == b.sound_incomplete && a.parts == b.parts && a.explain == b.explain;
  }
};

struct DecideOptions {
  bool explain = false;
  std::size_t jobs = 1;
};

// ---------------------------------------------------------------- abstraction tuples

using CoeffVec = std::vector<BigInt>;

inline std::string vec_text(const CoeffVec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i].str();
  return s + ")";
}

// (tag, c): tag 0 is the constant atom, 1..k a control variable, k+1 any other atom.
struct AbsTuple {
  std::size_t tag = 0;
  CoeffVec c;

  friend bool operator<(const AbsTuple& a, const AbsTuple& b) { return std::tie(a.tag, a.c) < std::tie(b.tag, b.c); }
  friend bool operator==(const AbsTuple& a, const AbsTuple& b) { return a.tag == b.tag && a.c == b.c; }
};

using Abs = std::set<AbsTuple>;

inline std::string abs_text(const Abs& a) {
  std::string s = "{";
  bool first = true;
  for (const auto& t : a) {
    s += (first ? "" : ", ") + std::string("(") + std::to_string(t.tag) + "," + vec_text(t.c) + ")";
    first = false;
  }
  return s + "}";
}

// Constant and control part of an abstraction.
struct AbsCore {
  CoeffVec constant;
  std::vector<CoeffVec> control;

  friend bool operator<(const AbsCore& a, const AbsCore& b) {
    return std::tie(a.constant, a.control) < std::tie(b.constant, b.control);
  }
  friend bool operator==(const AbsCore& a, const AbsCore& b) {
    return a.constant == b.constant && a.control == b.control;
  }
};

inline Abs core_tuples(const AbsCore& c) {
  Abs out;
  out.insert({0, c.constant});
  for (std::size_t x = 0; x < c.control.size(); ++x) out.insert({x + 1, c.control[x]});
  return out;
}

namespace detail {

inline bool lambda_one(const PathSummary& p, std::size_t j) {
  auto l = p.lambda(j);
  if (l.has_counter() || (l.c0 != 0 && l.c0 != 1)) throw StructureError("abstraction: lambda outside {0,1}");
  return l.c0 == 1;
}

}  // namespace detail

inline bool is_zero_vec(const CoeffVec& v) {
  return std::all_of(v.begin(), v.end(), [](const BigInt& x) { return x == 0; });
}

// Other-atom vector after p: lambda times c.
inline CoeffVec apply_other(const CoeffVec& c, const PathSummary& p) {
  CoeffVec out(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) out[j] = detail::lambda_one(p, j) ? c[j] : BigInt(0);
  return out;
}

// Abstraction after following p. With `drop`, the terms a cycle counter would
// multiply (lambda = 1 and a held class, or the constant) are omitted.
// Nonzero vectors of atoms no control variable holds afterwards go to `emitted`;
// zero vectors never change the output and are left out.
inline AbsCore apply_core(const AbsCore& in, const PathSummary& p, bool drop, std::vector<CoeffVec>& emitted) {
  if (p.parametric) throw StructureError("abstraction: parametric summary");
  p.check_independent();
  const std::size_t k = p.num_control(), l = p.num_data();
  std::vector<bool> lam(l);
  for (std::size_t j = 0; j < l; ++j) lam[j] = detail::lambda_one(p, j);
  AbsCore out;
  out.constant.resize(l);
  for (std::size_t j = 0; j < l; ++j) {
    out.constant[j] = lam[j] ? in.constant[j] : BigInt(0);
    if (!(drop && lam[j])) out.constant[j] += p.epsilon(j).c0;
  }
  out.control.assign(k, CoeffVec(l));
  std::vector<bool> set(k, false);
  for (std::size_t cls = 0; cls < p.class_count(); ++cls) {
    const std::size_t rep = p.class_rep(cls);
    const bool held = p.class_held(cls);
    CoeffVec v(l);
    for (std::size_t j = 0; j < l; ++j) {
      v[j] = lam[j] ? in.control[rep][j] : BigInt(0);
      if (!(drop && lam[j] && held)) v[j] += p.alpha(j, cls).c0;
    }
    bool any = false;
    for (std::size_t x = 0; x < k; ++x) {
      if (p.control[x] == Atom::ctrl(rep)) {
        out.control[x] = v;
        set[x] = true;
        any = true;
      }
    }
    if (!any && !is_zero_vec(v)) emitted.push_back(v);
  }
  auto fresh = p.fresh_atoms();
  for (const auto& f : fresh) {
    CoeffVec v(l);
    for (std::size_t j = 0; j < l; ++j) v[j] = p.data[j].coeff(f).c0;
    bool any = false;
    for (std::size_t x = 0; x < k; ++x) {
      if (p.control[x] == f) {
        out.control[x] = v;
        set[x] = true;
        any = true;
      }
    }
    if (!any && !is_zero_vec(v)) emitted.push_back(v);
  }
  for (std::size_t x = 0; x < k; ++x)
    if (!set[x]) throw StructureError("abstraction: control variable without an image");
  // variables equal afterwards carry equal vectors
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if (p.control[a] == p.control[b] && out.control[a] != out.control[b])
        throw std::logic_error("abstraction: equivalent control variables disagree");
  return out;
}

// The literal set form of one application.
inline Abs apply_abs(const Abs& in, const PathSummary& p, bool drop) {
  const std::size_t k = p.num_control(), l = p.num_data();
  AbsCore core{CoeffVec(l), std::vector<CoeffVec>(k, CoeffVec(l))};
  std::vector<CoeffVec> others;
  for (const auto& t : in) {
    if (t.tag == 0)
      core.constant = t.c;
    else if (t.tag <= k)
      core.control[t.tag - 1] = t.c;
    else
      others.push_back(t.c);
  }
  std::vector<CoeffVec> emitted;
  Abs out = core_tuples(apply_core(core, p, drop, emitted));
  for (const auto& v : emitted) out.insert({k + 1, v});
  for (const auto& v : others) {
    CoeffVec o = apply_other(v, p);
    if (!is_zero_vec(o)) out.insert({k + 1, o});
  }
  return out;
}

// ---------------------------------------------------------------- lasso analysis

// A multi-lasso of a normalized SNT with its summaries.
struct LassoAnalysis {
  struct Stage {
    std::size_t junction = 0;
    PathSummary handle;                // from the previous junction (or the initial state)
    std::vector<PathSummary> cycles;   // one traversal each, at the junction preorder
    std::vector<std::size_t> cycle_transitions;
    std::vector<std::string> cycle_names;
    std::string handle_name;
  };
  std::vector<Stage> stages;
  LinExpr output;           // O(q_m) over the atoms of the last junction
  std::vector<BigInt> b;    // coefficients of the data variables in O(q_m)
  std::string name;
  std::vector<std::size_t> data_group;  // representative of each data variable's link group
};

namespace detail {

inline std::vector<std::size_t> data_groups(const Snt& s) {
  UnionFind uf(s.num_data());
  for (const auto& [a, b] : s.links) {
    auto ra = s.var(a), rb = s.var(b);
    if (ra && rb && ra->kind == VarKind::data && rb->kind == VarKind::data) uf.unite(ra->index, rb->index);
  }
  std::vector<std::size_t> g(s.num_data());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = uf.find(j);
  return g;
}

// O(q') with the end transition's assignment substituted.
inline Expr end_output(const Snt& s, const Transition& e) {
  const Expr& o = *s.output[e.dst];
  return substitute(o, [&](VarRef v) -> std::optional<Expr> {
    if (v.kind == VarKind::control) {
      if (const auto* u = e.ctrl_update(v.index)) return Expr::of_var(u->source);
      return std::nullopt;
    }
    if (v.kind == VarKind::data) {
      for (const auto& u : e.data)
        if (u.var == v.index) return full_rhs(u);
    }
    return std::nullopt;
  });
}

inline std::string path_label(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
  return s;
}

}  // namespace detail

inline LassoAnalysis analyze_lasso(const NormalizedSnt& n, const MultiLasso& ml) {
  const Snt& s = n.snt;
  LassoAnalysis a;
  a.data_group = detail::data_groups(s);
  const bool multi = ml.stages.size() > 1;
  TotalPreorder at = n.initial;
  for (std::size_t si = 0; si < ml.stages.size(); ++si) {
    const auto& st = ml.stages[si];
    LassoAnalysis::Stage out;
    out.junction = st.junction;
    out.handle = summarize_path(s, st.handle, at);
    out.handle_name = multi ? "H" + std::to_string(si + 1) : "H";
    at = n.preorder[st.junction];
    for (std::size_t ci = 0; ci < st.bundle.size(); ++ci) {
      out.cycles.push_back(summarize_path(s, {st.bundle[ci]}, at));
      out.cycle_transitions.push_back(st.bundle[ci]);
      out.cycle_names.push_back(multi ? "C" + std::to_string(si + 1) + "," + std::to_string(ci + 1)
                                      : "C" + std::to_string(ci + 1));
    }
    a.stages.push_back(std::move(out));
  }
  const auto& e = s.transitions[ml.end_transition];
  Expr o = detail::end_output(s, e);
  a.output = eval_output(o, PathSummary::identity(at, s.num_data()));
  for (std::size_t j = 0; j < s.num_data(); ++j) a.b.push_back(a.output.coeff(Atom::data(j)).c0);
  std::vector<std::string> parts;
  for (const auto& st : a.stages) {
    parts.push_back(st.handle_name);
    if (!st.cycles.empty()) {
      std::string c = "(";
      for (std::size_t i = 0; i < st.cycle_names.size(); ++i) c += (i ? "," : "") + st.cycle_names[i];
      parts.push_back(c + ")");
    }
  }
  parts.push_back("end");
  a.name = detail::path_label(parts);
  return a;
}

// Initial valuation: linked data variables share one atom.
inline PathSummary initial_valuation(const LassoAnalysis& a, const TotalPreorder& init) {
  PathSummary id = PathSummary::identity(init, a.b.size());
  for (std::size_t j = 0; j < a.b.size(); ++j) id.data[j] = LinExpr::of(Atom::data(a.data_group[j]));
  return id;
}

// Step I: the output after H_1 ... H_r.
inline LinExpr step1_expression(const LassoAnalysis& a, const TotalPreorder& init) {
  PathSummary acc = initial_valuation(a, init);
  // the initial valuation is not a path, so substitute instead of composing
  for (const auto& st : a.stages) {
    const PathSummary& h = st.handle;
    PathSummary next = h;
    const std::size_t shift = acc.max_origin() + 1;
    for (std::size_t j = 0; j < h.num_data(); ++j)
      next.data[j] = h.data[j].substitute([&](const Atom& at) -> std::optional<LinExpr> {
        if (at.kind == AtomKind::init_data) return acc.data[at.index];
        if (at.kind == AtomKind::init_ctrl) return LinExpr::of(acc.control[at.index]);
        if (at.is_fresh()) return LinExpr::of(Atom::fresh(at.origin + shift, at.index, at.band));
        return std::nullopt;
      });
    for (std::size_t x = 0; x < h.num_control(); ++x) {
      const Atom& at = h.control[x];
      if (at.kind == AtomKind::init_ctrl)
        next.control[x] = acc.control[at.index];
      else
        next.control[x] = Atom::fresh(at.origin + shift, at.index, at.band);
    }
    next.start = acc.start;
    acc = next;
  }
  return a.output.substitute([&](const Atom& at) -> std::optional<LinExpr> {
    if (at.kind == AtomKind::init_data) return acc.data[at.index];
    if (at.kind == AtomKind::init_ctrl) return LinExpr::of(acc.control[at.index]);
    return std::nullopt;
  });
}

// b'' of junction s: data coefficients of O(q_m) pulled back through H_{s+1} ... H_r.
inline std::vector<BigInt> pulled_back_b(const LassoAnalysis& a, std::size_t s) {
  std::vector<BigInt> b = a.b;
  for (std::size_t u = s + 1; u < a.stages.size(); ++u) {
    const auto& h = a.stages[u].handle;
    for (std::size_t j = 0; j < b.size(); ++j)
      if (!detail::lambda_one(h, j)) b[j] = 0;
  }
  return b;
}

struct Step2Result {
  bool fires = false;
  std::string scheme;
  std::string detail;
  std::vector<std::string> explain;
};

namespace detail {

inline std::vector<bool> lambda_mask(const PathSummary& c) {
  std::vector<bool> m(c.num_data());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = lambda_one(c, j);
  return m;
}

inline std::string mask_text(const std::vector<bool>& m) {
  std::string s;
  for (bool b : m) s += b ? '1' : '0';
  return s;
}

// Literal scheme list for one junction: i1 then distinct tails whose first element differs from i1.
inline void enumerate_tails(std::size_t n, std::size_t i1, std::vector<std::size_t>& cur, std::vector<bool>& used,
                            const std::function<void(const std::vector<std::size_t>&)>& f) {
  f(cur);
  for (std::size_t c = 0; c < n; ++c) {
    if (used[c] || (cur.empty() && c == i1)) continue;
    used[c] = true;
    cur.push_back(c);
    enumerate_tails(n, i1, cur, used, f);
    cur.pop_back();
    used[c] = false;
  }
}

}  // namespace detail

// Step II over every junction; the tails are summarized by the lambda masks they can produce.
inline Step2Result step2(const LassoAnalysis& a, bool explain) {
  Step2Result r;
  const std::size_t l = a.b.size();
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    const auto& st = a.stages[s];
    if (st.cycles.empty()) continue;
    std::vector<BigInt> b = pulled_back_b(a, s);
    std::set<std::vector<bool>> masks{std::vector<bool>(l, true)};
    std::map<std::vector<bool>, std::string> mask_tail{{std::vector<bool>(l, true), ""}};
    for (std::size_t u = s; u < a.stages.size(); ++u) {
      for (std::size_t ci = 0; ci < a.stages[u].cycles.size(); ++ci) {
        auto lm = detail::lambda_mask(a.stages[u].cycles[ci]);
        std::set<std::vector<bool>> next = masks;
        for (const auto& m : masks) {
          std::vector<bool> mm(l);
          for (std::size_t j = 0; j < l; ++j) mm[j] = m[j] && lm[j];
          if (next.insert(mm).second) mask_tail[mm] = mask_tail[m] + " " + a.stages[u].cycle_names[ci];
        }
        masks = std::move(next);
      }
    }
    for (std::size_t i1 = 0; i1 < st.cycles.size(); ++i1) {
      const auto& c = st.cycles[i1];
      auto l1 = detail::lambda_mask(c);
      for (const auto& m : masks) {
        auto fire = [&](const BigInt& mu, const std::string& what) {
          if (mu == 0 || r.fires) return;
          r.fires = true;
          r.scheme = st.cycle_names[i1] + "^l1" + mask_tail[m];
          r.detail = "coefficient of l1 on " + what + " is " + mu.str();
        };
        for (std::size_t cls = 0; cls < c.class_count(); ++cls) {
          if (!c.class_held(cls)) continue;
          BigInt mu = 0;
          for (std::size_t j = 0; j < l; ++j)
            if (m[j] && l1[j]) mu += b[j] * c.alpha(j, cls).c0;
          fire(mu, "class " + std::to_string(cls));
        }
        BigInt mu0 = 0;
        for (std::size_t j = 0; j < l; ++j)
          if (m[j] && l1[j]) mu0 += b[j] * c.epsilon(j).c0;
        fire(mu0, "the constant atom");
      }
    }
    // literal schemes on a single junction, kept as an independent route
    if (a.stages.size() == 1 && st.cycles.size() <= 4) {
      bool literal = false;
      std::string first;
      for (std::size_t i1 = 0; i1 < st.cycles.size(); ++i1) {
        std::vector<std::size_t> cur;
        std::vector<bool> used(st.cycles.size(), false);
        detail::enumerate_tails(st.cycles.size(), i1, cur, used, [&](const std::vector<std::size_t>& tail) {
          auto sc = scheme_counter_coeffs(st.cycles, i1, tail, b, st.cycle_names);
          std::string name = st.cycle_names[i1] + "^l1";
          for (std::size_t t : tail) name += " " + st.cycle_names[t];
          bool f = sc.constant.first != 0;
          for (const auto& [cls, mn] : sc.per_class) f = f || mn.first != 0;
          if (f && !literal) first = name;
          literal = literal || f;
          if (explain)
            for (const auto& line : sc.explain) r.explain.push_back("scheme " + name + ": " + line);
        });
      }
      if (literal != r.fires) throw std::logic_error("step II: scheme enumeration and lambda masks disagree");
      if (literal) r.scheme = first;
    }
    if (r.fires) return r;
  }
  return r;
}

// ---------------------------------------------------------------- step III

struct StageAbstraction {
  std::map<AbsCore, std::string> xi;     // constant and control parts, with the path reaching them
  std::map<CoeffVec, std::string> delta;  // other-atom vectors
  std::set<BigInt> u;                     // bounded domain of the junction
};

struct Step3Result {
  bool fires = false;
  std::string path;
  std::string tuple;
  std::string detail;
  std::vector<StageAbstraction> stages;  // entering plus cycle closure, per junction
  std::size_t u_checks = 0;
};

namespace detail {

inline void collect(std::set<BigInt>& u, const CoeffVec& v) { u.insert(v.begin(), v.end()); }
inline void collect(std::set<BigInt>& u, const AbsCore& c) {
  collect(u, c.constant);
  for (const auto& v : c.control) collect(u, v);
}

// Entries of the abstractions after C_i, C_i C_i and C_i C_j from the entering sets.
inline std::set<BigInt> bounded_domain(const std::set<AbsCore>& cores, const std::set<CoeffVec>& others,
                                       const std::vector<PathSummary>& cycles) {
  std::set<BigInt> u{0};
  for (const auto& core : cores) {
    for (std::size_t i = 0; i < cycles.size(); ++i) {
      std::vector<CoeffVec> em1;
      AbsCore c1 = apply_core(core, cycles[i], true, em1);
      collect(u, c1);
      for (const auto& v : em1) collect(u, v);
      for (std::size_t j = 0; j < cycles.size(); ++j) {
        std::vector<CoeffVec> em2;
        AbsCore c2 = apply_core(c1, cycles[j], true, em2);
        collect(u, c2);
        for (const auto& v : em2) collect(u, v);
        for (const auto& v : em1) collect(u, apply_other(v, cycles[j]));
      }
    }
  }
  for (const auto& v : others)
    for (std::size_t i = 0; i < cycles.size(); ++i) {
      collect(u, apply_other(v, cycles[i]));
      for (std::size_t j = 0; j < cycles.size(); ++j) collect(u, apply_other(apply_other(v, cycles[i]), cycles[j]));
    }
  return u;
}

inline void assert_in(const std::set<BigInt>& u, const CoeffVec& v, std::size_t& checks) {
  for (const auto& x : v) {
    ++checks;
    if (!u.count(x)) throw std::logic_error("abstraction: coefficient " + x.str() + " outside the bounded domain");
  }
}

}  // namespace detail

inline AbsCore initial_core(std::size_t k, std::size_t l) { return AbsCore{CoeffVec(l), std::vector<CoeffVec>(k, CoeffVec(l))}; }

inline std::set<CoeffVec> initial_others(const LassoAnalysis& a) {
  const std::size_t l = a.b.size();
  std::map<std::size_t, CoeffVec> groups;
  for (std::size_t j = 0; j < l; ++j) {
    auto& v = groups.try_emplace(a.data_group[j], CoeffVec(l)).first->second;
    v[j] = 1;
  }
  std::set<CoeffVec> out;
  for (auto& [g, v] : groups) out.insert(v);
  return out;
}

// Staged (Xi, Delta) fixpoint; `check_u` asserts the bounded-domain property on every derived entry.
inline Step3Result compute_abstraction(const LassoAnalysis& a, bool check_u = true) {
  Step3Result r;
  if (a.stages.empty()) return r;
  const std::size_t k = a.stages.front().handle.num_control(), l = a.b.size();
  std::map<AbsCore, std::string> cores{{initial_core(k, l), ""}};
  std::map<CoeffVec, std::string> others;
  for (const auto& v : initial_others(a)) others.emplace(v, "");
  for (const auto& st : a.stages) {
    StageAbstraction sa;
    // through the handle
    for (const auto& [core, label] : cores) {
      std::vector<CoeffVec> em;
      AbsCore c = apply_core(core, st.handle, false, em);
      std::string lab = detail::path_label({label, st.handle_name});
      sa.xi.emplace(c, lab);
      for (const auto& v : em) sa.delta.emplace(v, lab);
    }
    for (const auto& [v, label] : others) {
      CoeffVec o = apply_other(v, st.handle);
      if (!is_zero_vec(o)) sa.delta.emplace(o, detail::path_label({label, st.handle_name}));
    }
    // cycle closure
    if (!st.cycles.empty()) {
      std::set<AbsCore> entering_cores;
      std::set<CoeffVec> entering_others;
      for (const auto& [c, lab] : sa.xi) entering_cores.insert(c);
      for (const auto& [v, lab] : sa.delta) entering_others.insert(v);
      if (check_u) sa.u = detail::bounded_domain(entering_cores, entering_others, st.cycles);
      std::vector<std::pair<AbsCore, std::string>> work(sa.xi.begin(), sa.xi.end());
      std::set<AbsCore> reached;
      for (std::size_t w = 0; w < work.size(); ++w) {
        for (std::size_t i = 0; i < st.cycles.size(); ++i) {
          std::vector<CoeffVec> em;
          AbsCore c = apply_core(work[w].first, st.cycles[i], true, em);
          std::string lab = detail::path_label({work[w].second, st.cycle_names[i]});
          if (check_u) {
            detail::assert_in(sa.u, c.constant, r.u_checks);
            for (const auto& v : c.control) detail::assert_in(sa.u, v, r.u_checks);
            for (const auto& v : em) detail::assert_in(sa.u, v, r.u_checks);
          }
          for (const auto& v : em) sa.delta.emplace(v, lab);
          if (reached.insert(c).second) {
            sa.xi.emplace(c, lab);
            work.emplace_back(c, lab);
          }
        }
      }
      std::vector<std::pair<CoeffVec, std::string>> dwork(sa.delta.begin(), sa.delta.end());
      for (std::size_t w = 0; w < dwork.size(); ++w) {
        for (std::size_t i = 0; i < st.cycles.size(); ++i) {
          CoeffVec v = apply_other(dwork[w].first, st.cycles[i]);
          if (check_u) detail::assert_in(sa.u, v, r.u_checks);
          std::string lab = detail::path_label({dwork[w].second, st.cycle_names[i]});
          if (!is_zero_vec(v) && sa.delta.emplace(v, lab).second) dwork.emplace_back(v, lab);
        }
      }
    }
    cores = sa.xi;
    others = sa.delta;
    r.stages.push_back(std::move(sa));
  }
  return r;
}

// Step III's three conditions against the last junction's sets.
inline void step3_check(const LassoAnalysis& a, const TotalPreorder& last, Step3Result& r) {
  const std::size_t l = a.b.size();
  const auto& sa = r.stages.back();
  auto dot = [&](const CoeffVec& c) {
    BigInt s = 0;
    for (std::size_t j = 0; j < l; ++j) s += a.b[j] * c[j];
    return s;
  };
  const BigInt a0 = a.output.coeff(Atom::constant()).c0;
  for (const auto& [core, label] : sa.xi) {
    BigInt v = a0 + dot(core.constant);
    if (v != 0) {
      r.fires = true;
      r.path = label;
      r.tuple = "(0," + vec_text(core.constant) + ")";
      r.detail = "constant atom coefficient " + v.str();
      return;
    }
    for (std::size_t x = 0; x < core.control.size(); ++x) {
      BigInt ax = a.output.coeff(Atom::ctrl(last.rep(x))).c0;
      BigInt w = ax + dot(core.control[x]);
      if (w != 0) {
        r.fires = true;
        r.path = label;
        r.tuple = "(" + std::to_string(x + 1) + "," + vec_text(core.control[x]) + ")";
        r.detail = "control atom coefficient " + w.str();
        return;
      }
    }
  }
  for (const auto& [v, label] : sa.delta) {
    BigInt w = dot(v);
    if (w != 0) {
      r.fires = true;
      r.path = label;
      r.tuple = "(" + std::to_string(a.stages.front().handle.num_control() + 1) + "," + vec_text(v) + ")";
      r.detail = "atom coefficient " + w.str();
      return;
    }
  }
}

// The literal family of abstraction sets, one per path H_1 s_1 ... H_s s_s; for golden data
// and for cross-checking (Xi, Delta). Throws if more than `cap` sets arise.
inline std::set<Abs> literal_abstractions(const LassoAnalysis& a, std::size_t cap = 20000) {
  if (a.stages.empty()) return {};
  const std::size_t k = a.stages.front().handle.num_control(), l = a.b.size();
  Abs init = core_tuples(initial_core(k, l));
  for (const auto& v : initial_others(a)) init.insert({k + 1, v});
  std::set<Abs> current{init};
  std::set<Abs> all;
  for (const auto& st : a.stages) {
    std::set<Abs> entering;
    for (const auto& x : current) entering.insert(apply_abs(x, st.handle, false));
    std::set<Abs> family = entering;
    std::vector<Abs> work(entering.begin(), entering.end());
    for (std::size_t w = 0; w < work.size(); ++w)
      for (const auto& c : st.cycles) {
        Abs n = apply_abs(work[w], c, true);
        if (family.insert(n).second) {
          if (family.size() > cap) throw StructureError("literal abstraction family exceeds the cap");
          work.push_back(n);
        }
      }
    current = family;
  }
  return current;
}

// ---------------------------------------------------------------- non-zero output

struct NonzeroResult {
  bool nonzero = false;
  Evidence evidence;
  std::vector<std::string> explain;
  std::size_t u_checks = 0;
};

inline NonzeroResult nonzero_lasso(const NormalizedSnt& n, const MultiLasso& ml, bool explain) {
  NonzeroResult out;
  const Snt& s = n.snt;
  if (!s.output[s.transitions[ml.end_transition].dst]) return out;
  LassoAnalysis a = analyze_lasso(n, ml);
  out.evidence.multilasso = a.name;
  if (explain) {
    out.explain.push_back("multi-lasso " + a.name);
    for (const auto& st : a.stages) {
      out.explain.push_back(st.handle_name + ":\n" + summary_text(st.handle, s.control, s.data));
      for (std::size_t i = 0; i < st.cycles.size(); ++i)
        out.explain.push_back(st.cycle_names[i] + ":\n" + summary_text(st.cycles[i], s.control, s.data));
    }
    out.explain.push_back("O = " + a.output.to_string(s.control, s.data));
  }
  LinExpr e1 = step1_expression(a, n.initial);
  if (explain) out.explain.push_back("step I: " + e1.to_string(s.control, s.data));
  if (!e1.is_zero()) {
    out.nonzero = true;
    out.evidence.step = "I";
    out.evidence.scheme = a.stages.size() > 1 ? "H1..H" + std::to_string(a.stages.size()) : "H";
    out.evidence.detail = "output after the handles is " + e1.to_string(s.control, s.data);
    return out;
  }
  Step2Result r2 = step2(a, explain);
  if (explain)
    for (const auto& line : r2.explain) out.explain.push_back("step II " + line);
  if (r2.fires) {
    out.nonzero = true;
    out.evidence.step = "II";
    out.evidence.scheme = r2.scheme;
    out.evidence.detail = r2.detail;
    return out;
  }
  Step3Result r3 = compute_abstraction(a);
  out.u_checks = r3.u_checks;
  step3_check(a, n.preorder[ml.last_junction()], r3);
  if (explain) {
    const auto& sa = r3.stages.back();
    for (const auto& [core, lab] : sa.xi) out.explain.push_back("step III xi " + abs_text(core_tuples(core)) + " via " + lab);
    for (const auto& [v, lab] : sa.delta) out.explain.push_back("step III delta " + vec_text(v) + " via " + lab);
  }
  if (r3.fires) {
    out.nonzero = true;
    out.evidence.step = "III";
    out.evidence.scheme = r3.path;
    out.evidence.tuple = r3.tuple;
    out.evidence.detail = r3.detail;
  }
  return out;
}

// Decides whether some run of the normalized SNT outputs a value other than 0.
inline NonzeroResult nonzero_output(const NormalizedSnt& n, bool explain = false) {
  auto violations = validate(n.snt);
  if (!violations.empty())
    throw UnsupportedError(violations.front().constraint, violations.front().message);
  NonzeroResult agg;
  for (const auto& ml : classify(n.snt)) {
    auto r = nonzero_lasso(n, ml, explain);
    agg.u_checks += r.u_checks;
    agg.explain.insert(agg.explain.end(), r.explain.begin(), r.explain.end());
    if (r.nonzero) {
      r.explain = agg.explain;
      r.u_checks = agg.u_checks;
      return r;
    }
  }
  return agg;
}

namespace detail {

inline Verdict unsupported(const std::string& property, const UnsupportedError& e) {
  Verdict v;
  v.property = property;
  v.answer = Answer::unsupported;
  v.evidence.step = e.constraint();
  v.evidence.detail = e.what();
  return v;
}

// Runs f over every normalized variant, in parallel with `jobs` threads; the first
// nonzero variant in variant order decides.
inline std::pair<std::optional<std::size_t>, std::vector<NonzeroResult>> any_nonzero(
    const std::vector<NormalizedSnt>& vs, const DecideOptions& opt) {
  std::vector<NonzeroResult> results(vs.size());
  std::vector<std::optional<UnsupportedError>> errors(vs.size());
  std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, vs.size()));
  std::mutex m;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> g(m);
        if (next >= vs.size()) return;
        i = next++;
      }
      try {
        results[i] = nonzero_output(vs[i], opt.explain);
      } catch (const UnsupportedError& e) {
        errors[i] = e;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    for (std::size_t t = 0; t < jobs; ++t) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (errors[i]) throw *errors[i];
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (results[i].nonzero) return {i, std::move(results)};
  return {std::nullopt, std::move(results)};
}

}  // namespace detail

inline Verdict check_nonzero(const Snt& s, const DecideOptions& opt = {}) {
  Verdict v;
  v.property = "nonzero";
  try {
    auto vs = normalize(s);
    auto [hit, results] = detail::any_nonzero(vs, opt);
    for (std::size_t i = 0; i < results.size(); ++i)
      for (const auto& line : results[i].explain) v.explain.push_back("variant " + std::to_string(i) + ": " + line);
    if (hit) {
      v.answer = Answer::holds;
      v.evidence = results[*hit].evidence;
      v.evidence.detail = "variant " + std::to_string(*hit) + " " + vs[*hit].initial.to_string(s.control) + ": " +
                          v.evidence.detail;
    } else {
      v.answer = Answer::fails;
      v.evidence.detail = "every run outputs 0 or nothing on all " + std::to_string(vs.size()) + " variants";
    }
  } catch (const UnsupportedError& e) {
    return detail::unsupported("nonzero", e);
  }
  return v;
}

inline Verdict check_equivalence(const Snt& a, const Snt& b, const DecideOptions& opt = {}) {
  Verdict v;
  v.property = "equivalence";
  try {
    for (const Snt* s : {&a, &b}) {
      auto viol = validate(*s);
      if (!viol.empty()) throw UnsupportedError(viol.front().constraint, s->name + ": " + viol.front().message);
    }
    Snt p = product(a, b);
    Verdict nz = check_nonzero(p, opt);
    if (nz.answer == Answer::unsupported) {
      nz.property = "equivalence";
      return nz;
    }
    v.explain = nz.explain;
    v.evidence = nz.evidence;
    if (nz.answer == Answer::holds) {
      v.answer = Answer::fails;
    } else {
      v.answer = Answer::holds;
      v.evidence.detail = "the difference machine never outputs a nonzero value";
    }
  } catch (const UnsupportedError& e) {
    return detail::unsupported("equivalence", e);
  }
  return v;
}

// Commutative iff equivalent to its first-two swap and its rotation on words of length >= 2.
inline Verdict check_commutativity(const Snt& s, const DecideOptions& opt = {}) {
  Verdict v;
  v.property = "commutativity";
  auto viol = validate(s);
  if (!viol.empty()) return detail::unsupported("commutativity", UnsupportedError(viol.front().constraint, viol.front().message));
  Snt r = restrict_min_length(s);
  for (const auto& [name, other] : {std::pair<std::string, Snt>{"swap", build_swap_snt(r)},
                                    std::pair<std::string, Snt>{"rotate", build_rotate_snt(r)}}) {
    Verdict e = check_equivalence(r, other, opt);
    for (const auto& line : e.explain) v.explain.push_back(name + ": " + line);
    if (e.answer == Answer::unsupported) {
      e.property = "commutativity";
      return e;
    }
    if (e.answer == Answer::fails) {
      v.answer = Answer::fails;
      v.evidence = e.evidence;
      v.evidence.detail = name + ": " + v.evidence.detail;
      return v;
    }
  }
  v.answer = Answer::holds;
  v.evidence.detail = "equivalent to its swap and rotation";
  return v;
}

namespace detail {

inline void linear_leaves(const AstExprPtr& e, std::vector<AstExprPtr>& out) {
  if (linearize(*e)) {
    out.push_back(e);
    return;
  }
  if (e->args.empty()) throw UnsupportedError("linear-return", "return leaf '" + expr_text(*e) + "' is not linear");
  for (const auto& a : e->args) linear_leaves(a, out);
}

inline ReducerProgram with_linear_return(const ReducerProgram& p, const AstExprPtr& e) {
  ReducerProgram q = p;
  q.ret.kind = ReturnExpr::Kind::linear;
  q.ret.function.clear();
  q.ret.args = {e};
  q.ret.source = e;
  return q;
}

}  // namespace detail

inline Verdict check_single_pass(const ReducerProgram& p, const DecideOptions& opt) {
  Verdict v;
  v.property = "commutativity";
  try {
    if (p.ret.kind == ReturnExpr::Kind::linear) return check_commutativity(program_to_snt(p), opt);
    std::vector<AstExprPtr> leaves;
    for (const auto& a : p.ret.args) detail::linear_leaves(a, leaves);
    std::set<std::string> seen;
    leaves.erase(std::remove_if(leaves.begin(), leaves.end(),
                                [&](const AstExprPtr& e) { return !seen.insert(expr_text(*e)).second; }),
                 leaves.end());
    v.answer = Answer::holds;
    for (const auto& e : leaves) {
      Verdict part = check_commutativity(program_to_snt(detail::with_linear_return(p, e)), opt);
      v.parts.emplace_back(expr_text(*e), part);
      if (part.answer == Answer::unsupported) return part;
      if (part.answer == Answer::fails && v.answer == Answer::holds) {
        v.answer = Answer::fails;
        v.evidence = part.evidence;
        v.evidence.detail = "argument " + expr_text(*e) + ": " + part.evidence.detail;
      }
    }
    if (v.answer == Answer::holds) v.evidence.detail = "every argument of the return function is commutative";
  } catch (const UnsupportedError& e) {
    return detail::unsupported("commutativity", e);
  }
  return v;
}

// Commutativity of a reducer program. With one `init`, the two passes are checked
// separately; HOLDS is then sound but FAILS may be spurious.
inline Verdict check_program(const ReducerProgram& p, const DecideOptions& opt = {}) {
  if (!p.has_init()) return check_single_pass(p, opt);
  Verdict v;
  v.property = "commutativity";
  v.sound_incomplete = true;
  try {
    auto split = check_multipass(p);
    Verdict v1 = check_single_pass(split.phase1, opt);
    Verdict v2 = check_single_pass(split.phase2, opt);
    v.parts.emplace_back("phase1", v1);
    v.parts.emplace_back("phase2", v2);
    for (const Verdict* part : {&v1, &v2}) {
      if (part->answer == Answer::unsupported) {
        v.answer = Answer::unsupported;
        v.evidence = part->evidence;
        return v;
      }
    }
    if (v1.answer == Answer::holds && v2.answer == Answer::holds) {
      v.answer = Answer::holds;
      v.evidence.detail = "both passes are commutative";
    } else {
      v.answer = Answer::fails;
      v.evidence = v1.answer == Answer::fails ? v1.evidence : v2.evidence;
      v.evidence.detail = "a pass is not commutative (the split check is incomplete): " + v.evidence.detail;
    }
  } catch (const UnsupportedError& e) {
    Verdict u = detail::unsupported("commutativity", e);
    u.sound_incomplete = true;
    return u;
  }
  return v;
}

}  // namespace redcheck
