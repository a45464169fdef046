#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "redcheck/guard.hpp"
#include "redcheck/preorder.hpp"
#include "redcheck/snt.hpp"

namespace redcheck {

using BigInt = boost::multiprecision::cpp_int;

// c0 + c1 * l for the single live cycle counter l.
struct CounterCoeff {
  BigInt c0 = 0;
  BigInt c1 = 0;

  CounterCoeff() = default;
  CounterCoeff(BigInt a, BigInt b = 0) : c0(std::move(a)), c1(std::move(b)) {}

  bool is_zero() const { return c0 == 0 && c1 == 0; }
  bool has_counter() const { return c1 != 0; }
  BigInt at(const BigInt& l) const { return c0 + c1 * l; }

  CounterCoeff& operator+=(const CounterCoeff& o) {
    c0 += o.c0;
    c1 += o.c1;
    return *this;
  }
  friend CounterCoeff operator+(CounterCoeff a, const CounterCoeff& b) { return a += b; }
  friend CounterCoeff operator*(const CounterCoeff& a, const CounterCoeff& b) {
    if (a.has_counter() && b.has_counter()) throw StructureError("product of two counter-bearing coefficients");
    return CounterCoeff(a.c0 * b.c0, a.c0 * b.c1 + a.c1 * b.c0);
  }
  friend bool operator==(const CounterCoeff& a, const CounterCoeff& b) { return a.c0 == b.c0 && a.c1 == b.c1; }
  friend bool operator!=(const CounterCoeff& a, const CounterCoeff& b) { return !(a == b); }

  std::string to_string() const {
    if (c1 == 0) return c0.str();
    std::string l = c1 == 1 ? "l" : c1.str() + "*l";
    if (c0 == 0) return l;
    return "(" + c0.str() + "+" + l + ")";
  }
};

enum class AtomKind : std::uint8_t { constant, init_ctrl, init_data, fresh };

// Fresh atoms of a cycle power come in bands: iterations 1..l-2, l-1 and l.
enum class Band : std::uint8_t { exact, early, penultimate, last };

struct Atom {
  AtomKind kind = AtomKind::constant;
  std::size_t origin = 0;  // fresh only: which traversal introduced it
  Band band = Band::exact;
  std::size_t index = 0;

  static Atom constant() { return {}; }
  static Atom ctrl(std::size_t i) { return {AtomKind::init_ctrl, 0, Band::exact, i}; }
  static Atom data(std::size_t j) { return {AtomKind::init_data, 0, Band::exact, j}; }
  static Atom fresh(std::size_t origin, std::size_t j, Band b = Band::exact) { return {AtomKind::fresh, origin, b, j}; }

  bool is_fresh() const { return kind == AtomKind::fresh; }

  friend bool operator<(const Atom& a, const Atom& b) {
    return std::tie(a.kind, a.origin, a.band, a.index) < std::tie(b.kind, b.origin, b.band, b.index);
  }
  friend bool operator==(const Atom& a, const Atom& b) {
    return std::tie(a.kind, a.origin, a.band, a.index) == std::tie(b.kind, b.origin, b.band, b.index);
  }
  friend bool operator!=(const Atom& a, const Atom& b) { return !(a == b); }
};

inline std::string atom_text(const Atom& a, const std::vector<std::string>& control = {},
                             const std::vector<std::string>& data = {}) {
  switch (a.kind) {
    case AtomKind::constant: return "1";
    case AtomKind::init_ctrl: return (a.index < control.size() ? control[a.index] : "x" + std::to_string(a.index)) + "@0";
    case AtomKind::init_data: return (a.index < data.size() ? data[a.index] : "y" + std::to_string(a.index)) + "@0";
    case AtomKind::fresh: {
      static const char* bands[] = {"", ":early", ":pen", ":last"};
      return "d" + std::to_string(a.origin) + "." + std::to_string(a.index) + bands[static_cast<int>(a.band)];
    }
  }
  return "?";
}

// Linear combination of atoms; the constant part is the coefficient of Atom::constant().
struct LinExpr {
  std::map<Atom, CounterCoeff> terms;

  static LinExpr of(const Atom& a, CounterCoeff c = CounterCoeff(1)) {
    LinExpr e;
    e.add(a, std::move(c));
    return e;
  }

  void add(const Atom& a, const CounterCoeff& c) {
    if (c.is_zero()) return;
    auto [it, fresh] = terms.emplace(a, c);
    if (!fresh) {
      it->second += c;
      if (it->second.is_zero()) terms.erase(it);
    }
  }
  LinExpr& operator+=(const LinExpr& o) {
    for (const auto& [a, c] : o.terms) add(a, c);
    return *this;
  }
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }

  LinExpr scaled(const CounterCoeff& k) const {
    LinExpr r;
    if (k.is_zero()) return r;
    for (const auto& [a, c] : terms) r.add(a, c * k);
    return r;
  }

  CounterCoeff coeff(const Atom& a) const {
    auto it = terms.find(a);
    return it == terms.end() ? CounterCoeff() : it->second;
  }
  bool is_zero() const { return terms.empty(); }
  bool has_counter() const {
    for (const auto& [a, c] : terms)
      if (c.has_counter()) return true;
    return false;
  }

  template <typename F>
  LinExpr substitute(F&& sub) const {
    LinExpr r;
    for (const auto& [a, c] : terms) {
      std::optional<LinExpr> s = sub(a);
      if (s)
        r += s->scaled(c);
      else
        r.add(a, c);
    }
    return r;
  }

  LinExpr without_counter() const {
    LinExpr r;
    for (const auto& [a, c] : terms) r.add(a, CounterCoeff(c.c0));
    return r;
  }

  friend bool operator==(const LinExpr& a, const LinExpr& b) { return a.terms == b.terms; }
  friend bool operator!=(const LinExpr& a, const LinExpr& b) { return !(a == b); }

  std::string to_string(const std::vector<std::string>& control = {}, const std::vector<std::string>& data = {}) const {
    if (terms.empty()) return "0";
    std::string s;
    for (const auto& [a, c] : terms) {
      if (!s.empty()) s += " + ";
      if (a.kind == AtomKind::constant) {
        s += c.to_string();
      } else if (c == CounterCoeff(1)) {
        s += atom_text(a, control, data);
      } else {
        s += c.to_string() + "*" + atom_text(a, control, data);
      }
    }
    return s;
  }
};

// ---------------------------------------------------------------- path summaries

// Symbolic effect of a path started from a state whose control variables are
// ordered by `start`. Initial control values are represented by the atom of
// the minimal index of their class; fresh atoms stand for input positions
// not forced equal to an initial control value.
struct PathSummary {
  TotalPreorder start;
  std::vector<Atom> control;  // value of x_i afterwards: init_ctrl(rep) or fresh
  std::vector<LinExpr> data;  // value of y_j afterwards
  std::size_t length = 0;
  std::size_t fresh_count = 0;                       // r: fresh classes (exact summaries only)
  std::vector<std::vector<std::size_t>> equiv;       // classes of positions 1..k+n, exact summaries only
  bool parametric = false;                           // produced by cycle_power

  std::size_t num_control() const { return control.size(); }
  std::size_t num_data() const { return data.size(); }

  static PathSummary identity(const TotalPreorder& start, std::size_t num_data) {
    PathSummary s;
    s.start = start;
    for (std::size_t i = 0; i < start.size(); ++i) s.control.push_back(Atom::ctrl(start.rep(i)));
    for (std::size_t j = 0; j < num_data; ++j) s.data.push_back(LinExpr::of(Atom::data(j)));
    for (std::size_t i = 0; i < start.size(); ++i) {
      if (start.rep(i) != i) continue;
      std::vector<std::size_t> cls;
      for (std::size_t m : start.class_members(start.rank(i))) cls.push_back(m + 1);
      s.equiv.push_back(cls);
    }
    return s;
  }

  // Start classes are numbered by rank; the representative is the minimal member.
  std::size_t class_count() const { return start.class_count(); }
  std::size_t class_rep(std::size_t cls) const { return start.class_members(cls).front(); }
  std::size_t class_of(std::size_t x) const { return start.rank(x); }

  bool persistent(std::size_t x) const { return control[x].kind == AtomKind::init_ctrl; }
  std::size_t pi_pe(std::size_t x) const { return start.rank(control[x].index); }
  // Start classes still held by some control variable.
  bool class_held(std::size_t cls) const {
    for (std::size_t x = 0; x < control.size(); ++x)
      if (persistent(x) && pi_pe(x) == cls) return true;
    return false;
  }

  CounterCoeff epsilon(std::size_t j) const { return data[j].coeff(Atom::constant()); }
  CounterCoeff lambda(std::size_t j) const { return data[j].coeff(Atom::data(j)); }
  CounterCoeff alpha(std::size_t j, std::size_t cls) const { return data[j].coeff(Atom::ctrl(class_rep(cls))); }

  std::size_t max_origin() const {
    std::size_t m = 0;
    bool any = false;
    auto see = [&](const Atom& a) {
      if (a.is_fresh()) {
        m = std::max(m, a.origin);
        any = true;
      }
    };
    for (const auto& a : control) see(a);
    for (const auto& e : data)
      for (const auto& [a, c] : e.terms) see(a);
    return any ? m : 0;
  }

  // Fresh atoms in order of appearance.
  std::vector<Atom> fresh_atoms() const {
    std::set<Atom> s;
    for (const auto& a : control)
      if (a.is_fresh()) s.insert(a);
    for (const auto& e : data)
      for (const auto& [a, c] : e.terms)
        if (a.is_fresh()) s.insert(a);
    return {s.begin(), s.end()};
  }

  // lambda must be 0 or 1 and the only initial data atom of y_j is y_j's own.
  void check_independent() const {
    for (std::size_t j = 0; j < data.size(); ++j) {
      for (const auto& [a, c] : data[j].terms) {
        if (a.kind != AtomKind::init_data) continue;
        if (a.index != j) throw StructureError("summary: data variable depends on another data variable");
        if (c != CounterCoeff(0) && c != CounterCoeff(1)) throw StructureError("summary: lambda outside {0,1}");
      }
    }
  }

  friend bool operator==(const PathSummary& a, const PathSummary& b) {
    return a.start == b.start && a.control == b.control && a.data == b.data;
  }
};

// Renumbers fresh atoms as exact atoms of a single origin in (origin, band, index) order.
inline PathSummary canonical(const PathSummary& s) {
  auto fr = s.fresh_atoms();
  std::map<Atom, Atom> rename;
  for (std::size_t i = 0; i < fr.size(); ++i) rename[fr[i]] = Atom::fresh(0, i);
  PathSummary out = s;
  for (auto& a : out.control)
    if (a.is_fresh()) a = rename[a];
  for (auto& e : out.data)
    e = e.substitute([&](const Atom& a) -> std::optional<LinExpr> {
      if (!a.is_fresh()) return std::nullopt;
      return LinExpr::of(rename[a]);
    });
  return out;
}

inline std::string summary_text(const PathSummary& s, const std::vector<std::string>& control = {},
                                const std::vector<std::string>& data = {}) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.control.size(); ++i)
    os << (i < control.size() ? control[i] : "x" + std::to_string(i)) << " = " << atom_text(s.control[i], control, data)
       << "\n";
  for (std::size_t j = 0; j < s.data.size(); ++j)
    os << (j < data.size() ? data[j] : "y" + std::to_string(j)) << " = " << s.data[j].to_string(control, data) << "\n";
  return os.str();
}

namespace detail {

struct PathWalk {
  UnionFind uf;
  std::vector<SymAtom> atoms;
  std::vector<std::size_t> ctrl;                // symbol held by each control variable
  std::vector<std::map<std::size_t, BigInt>> data_sym;  // symbol coefficients per data variable
  std::vector<std::optional<LinExpr>> data_fixed;  // constant and initial data parts
  std::size_t n = 0;
};

}  // namespace detail

// Summary of the non-empty or empty transition path `path` of s, started with
// control variables ordered by `start`. Throws StructureError if infeasible.
inline PathSummary summarize_path(const Snt& s, const std::vector<std::size_t>& path, const TotalPreorder& start) {
  const std::size_t k = s.num_control(), l = s.num_data();
  if (start.size() != k) throw StructureError("summarize_path: preorder size does not match the control variables");
  std::size_t n = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& t = s.transitions[path[i]];
    if (i > 0 && s.transitions[path[i - 1]].dst != t.src) throw StructureError("summarize_path: transitions are not consecutive");
    if (t.end && i + 1 != path.size()) throw StructureError("summarize_path: end transition before the end of the path");
    if (!t.end) ++n;
  }
  UnionFind uf(k + n);
  std::vector<SymAtom> atoms;
  for (std::size_t i = 0; i < k; ++i) {
    if (start.rep(i) != i) {
      uf.unite(start.rep(i), i);
      atoms.push_back({start.rep(i), Rel::eq, i});
    }
  }
  auto reps = start.reps();
  for (std::size_t a = 0; a < reps.size(); ++a)
    for (std::size_t b = 0; b < reps.size(); ++b)
      if (start.rank(reps[a]) + 1 == start.rank(reps[b])) atoms.push_back({reps[a], Rel::lt, reps[b]});

  // data values as linear forms over symbols (control symbols and positions),
  // the constant and the initial data atoms
  struct Form {
    std::map<std::size_t, BigInt> sym;
    LinExpr rest;
  };
  std::vector<std::size_t> ctrl(k);
  for (std::size_t i = 0; i < k; ++i) ctrl[i] = i;
  std::vector<Form> data(l);
  for (std::size_t j = 0; j < l; ++j) data[j].rest = LinExpr::of(Atom::data(j));

  std::size_t pos = 0;
  for (std::size_t ti : path) {
    const auto& t = s.transitions[ti];
    std::optional<std::size_t> cur;
    if (!t.end) cur = k + pos++;
    auto sym = [&](VarRef v) -> std::size_t {
      if (v.is_cur()) {
        if (!cur) throw StructureError("summarize_path: end transition reads cur");
        return *cur;
      }
      if (v.kind != VarKind::control) throw StructureError("summarize_path: guard over a data variable");
      return ctrl[v.index];
    };
    for (const auto& a : t.guard) {
      std::size_t x = sym(a.lhs), y = sym(a.rhs);
      atoms.push_back({x, a.rel, y});
      if (a.rel == Rel::eq) uf.unite(x, y);
    }
    std::vector<Form> next = data;
    for (const auto& u : t.data) {
      Form f;
      if (u.accumulate) f = data[u.var];
      f.rest.add(Atom::constant(), CounterCoeff(BigInt(u.expr.constant)));
      for (const auto& term : u.expr.terms) {
        if (term.var.kind == VarKind::data) {
          if (term.var.index == u.var && !u.accumulate && term.coeff == 1) {
            Form old = data[u.var];
            for (auto& [k2, c] : old.sym) f.sym[k2] += c;
            f.rest += old.rest;
            continue;
          }
          throw StructureError("summarize_path: update reads another data variable");
        }
        f.sym[sym(term.var)] += BigInt(term.coeff);
      }
      next[u.var] = f;
    }
    std::vector<std::size_t> nctrl = ctrl;
    for (const auto& u : t.ctrl) nctrl[u.var] = sym(u.source);
    ctrl = nctrl;
    data = next;
  }
  if (!guard_sat(k + n, atoms)) throw StructureError("summarize_path: path is infeasible from the given preorder");

  PathSummary out;
  out.start = start;
  out.length = n;
  std::map<std::size_t, Atom> atom_of_root;
  std::size_t fresh = 0;
  for (std::size_t v = 0; v < k + n; ++v) {
    std::size_t r = uf.find(v);
    if (atom_of_root.count(r)) continue;
    // roots are minimal members, so a class holding a control symbol has one as root
    atom_of_root[r] = r < k ? Atom::ctrl(r) : Atom::fresh(0, fresh++);
  }
  out.fresh_count = fresh;
  std::map<std::size_t, std::vector<std::size_t>> classes;
  for (std::size_t v = 0; v < k + n; ++v) classes[uf.find(v)].push_back(v + 1);
  for (auto& [r, c] : classes) out.equiv.push_back(c);
  for (std::size_t i = 0; i < k; ++i) out.control.push_back(atom_of_root[uf.find(ctrl[i])]);
  for (std::size_t j = 0; j < l; ++j) {
    LinExpr e = data[j].rest;
    for (const auto& [v, c] : data[j].sym) e.add(atom_of_root[uf.find(v)], CounterCoeff(c));
    out.data.push_back(e);
  }
  return out;
}

// Order constraints of a path over symbols 0..k-1 (initial control values)
// and k..k+n-1 (input positions).
struct PathConstraints {
  std::size_t num_control = 0;
  std::size_t length = 0;
  std::vector<SymAtom> atoms;
};

inline PathConstraints path_constraints(const Snt& s, const std::vector<std::size_t>& path, const TotalPreorder& start) {
  PathConstraints pc;
  const std::size_t k = s.num_control();
  pc.num_control = k;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (start.rank(i) <= start.rank(j) && i != j) pc.atoms.push_back({i, start.relation(i, j), j});
  std::vector<std::size_t> ctrl(k);
  for (std::size_t i = 0; i < k; ++i) ctrl[i] = i;
  for (std::size_t ti : path) {
    const auto& t = s.transitions[ti];
    std::size_t cur = k + pc.length;
    if (!t.end) ++pc.length;
    auto sym = [&](VarRef v) { return v.is_cur() ? cur : ctrl[v.index]; };
    for (const auto& a : t.guard) pc.atoms.push_back({sym(a.lhs), a.rel, sym(a.rhs)});
    std::vector<std::size_t> next = ctrl;
    for (const auto& u : t.ctrl) next[u.var] = sym(u.source);
    ctrl = next;
  }
  return pc;
}

// Concrete values for the symbols of pc satisfying its atoms, spread at random.
// Returns nullopt if the constraints are unsatisfiable.
template <typename Rng>
std::optional<std::vector<Value>> path_witness(const PathConstraints& pc, Rng& rng, Value base = 0, Value max_gap = 3) {
  const std::size_t n = pc.num_control + pc.length;
  if (!guard_sat(n, pc.atoms)) return std::nullopt;
  UnionFind uf(n);
  for (const auto& a : pc.atoms)
    if (a.rel == Rel::eq) uf.unite(a.lhs, a.rhs);
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& a : pc.atoms) {
    if (a.rel == Rel::eq) continue;
    std::size_t l = uf.find(a.lhs), r = uf.find(a.rhs);
    if (a.rel == Rel::gt) std::swap(l, r);
    succ[l].push_back(r);
    ++indeg[r];
  }
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (uf.find(v) == v && indeg[v] == 0) ready.push_back(v);
  std::vector<Value> at_root(n, 0);
  std::uniform_int_distribution<Value> gap(1, std::max<Value>(1, max_gap));
  Value next = base;
  while (!ready.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
    std::size_t i = pick(rng);
    std::size_t v = ready[i];
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(i));
    at_root[v] = next;
    next += gap(rng);
    for (std::size_t w : succ[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  std::vector<Value> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = at_root[uf.find(v)];
  return out;
}

// Classes of positions 1..k (control variables) and k+1..k+n (inputs) forced equal by the path.
inline std::vector<std::vector<std::size_t>> path_equiv_relation(const Snt& s, const std::vector<std::size_t>& path,
                                                                 const TotalPreorder& start) {
  return summarize_path(s, path, start).equiv;
}

namespace detail {

inline bool same_equalities(const PathSummary& s1, const TotalPreorder& next) {
  for (std::size_t a = 0; a < s1.control.size(); ++a)
    for (std::size_t b = 0; b < s1.control.size(); ++b)
      if ((s1.control[a] == s1.control[b]) != next.equiv(a, b)) return false;
  return true;
}

}  // namespace detail

// Summary of s1 followed by s2: s2's initial atoms are replaced by s1's images.
inline PathSummary compose(const PathSummary& s1, const PathSummary& s2) {
  if (s1.num_control() != s2.num_control() || s1.num_data() != s2.num_data())
    throw StructureError("compose: summaries over different variables");
  if (!detail::same_equalities(s1, s2.start)) throw StructureError("compose: junction preorder mismatch");
  const std::size_t shift = s1.max_origin() + 1;
  auto image = [&](const Atom& a) -> std::optional<LinExpr> {
    switch (a.kind) {
      case AtomKind::constant: return std::nullopt;
      case AtomKind::init_ctrl: return LinExpr::of(s1.control[a.index]);
      case AtomKind::init_data: return s1.data[a.index];
      case AtomKind::fresh: return LinExpr::of(Atom::fresh(a.origin + shift, a.index, a.band));
    }
    return std::nullopt;
  };
  PathSummary out;
  out.start = s1.start;
  out.length = s1.length + s2.length;
  out.fresh_count = s1.fresh_count + s2.fresh_count;
  out.parametric = s1.parametric || s2.parametric;
  for (const auto& a : s2.control) {
    if (a.kind == AtomKind::init_ctrl)
      out.control.push_back(s1.control[a.index]);
    else
      out.control.push_back(Atom::fresh(a.origin + shift, a.index, a.band));
  }
  for (const auto& e : s2.data) out.data.push_back(e.substitute(image));
  return out;
}

// Summary of l >= 2 traversals of a self-loop with summary c; counter-bearing
// coefficients use the symbolic l, fresh atoms are grouped in bands.
inline PathSummary cycle_power(const PathSummary& c) {
  if (c.parametric) throw StructureError("cycle_power: input is already parametric");
  if (c.max_origin() != 0) throw StructureError("cycle_power: input is not a single traversal");
  if (!detail::same_equalities(c, c.start)) throw StructureError("cycle_power: not a self-loop summary");
  c.check_independent();
  const std::size_t k = c.num_control();
  for (std::size_t x = 0; x < k; ++x)
    if (c.persistent(x) && c.pi_pe(x) != c.class_of(x))
      throw StructureError("cycle_power: loop moves an initial value to another class");

  PathSummary out;
  out.start = c.start;
  out.parametric = true;
  for (const auto& a : c.control) out.control.push_back(a.is_fresh() ? Atom::fresh(0, a.index, Band::last) : a);

  // fresh atom -> start classes whose representative receives it
  std::map<std::size_t, std::vector<std::size_t>> holders;
  for (std::size_t x = 0; x < k; ++x)
    if (c.control[x].is_fresh() && c.start.rep(x) == x) holders[c.control[x].index].push_back(c.class_of(x));

  for (std::size_t j = 0; j < c.num_data(); ++j) {
    const bool lam = c.lambda(j) == CounterCoeff(1);
    const LinExpr& e = c.data[j];
    LinExpr r;
    for (const auto& [a, coeff] : e.terms) {
      const BigInt v = coeff.c0;
      switch (a.kind) {
        case AtomKind::constant: r.add(a, lam ? CounterCoeff(0, v) : CounterCoeff(v)); break;
        case AtomKind::init_data: r.add(a, CounterCoeff(v)); break;
        case AtomKind::init_ctrl: {
          std::size_t cls = c.class_of(a.index);
          if (c.class_held(cls))
            r.add(a, lam ? CounterCoeff(0, v) : CounterCoeff(v));
          else if (lam)
            r.add(a, CounterCoeff(v));
          break;
        }
        case AtomKind::fresh: break;
      }
    }
    for (const auto& f : c.fresh_atoms()) {
      BigInt beta = e.coeff(f).c0;
      BigInt held = 0;
      auto it = holders.find(f.index);
      bool is_held = it != holders.end();
      if (is_held)
        for (std::size_t cls : it->second) held += c.alpha(j, cls).c0;
      BigInt early, pen;
      if (is_held) {
        early = lam ? beta + held : BigInt(0);
        pen = (lam ? beta : BigInt(0)) + held;
      } else {
        early = lam ? beta : BigInt(0);
        pen = lam ? beta : BigInt(0);
      }
      r.add(Atom::fresh(0, f.index, Band::early), CounterCoeff(early));
      r.add(Atom::fresh(0, f.index, Band::penultimate), CounterCoeff(pen));
      r.add(Atom::fresh(0, f.index, Band::last), CounterCoeff(beta));
    }
    out.data.push_back(r);
  }
  out.fresh_count = c.fresh_count;
  return out;
}

// Concrete summary of the parametric one at counter value l >= 2; iteration s
// gets fresh origin s-1.
inline PathSummary instantiate(const PathSummary& p, std::size_t l) {
  if (l < 2) throw StructureError("instantiate: counter must be at least 2");
  auto band_atoms = [&](const Atom& a) -> LinExpr {
    LinExpr r;
    switch (a.band) {
      case Band::exact: r.add(a, CounterCoeff(1)); break;
      case Band::early:
        for (std::size_t s = 1; s + 2 <= l; ++s) r.add(Atom::fresh(a.origin + s - 1, a.index), CounterCoeff(1));
        break;
      case Band::penultimate: r.add(Atom::fresh(a.origin + l - 2, a.index), CounterCoeff(1)); break;
      case Band::last: r.add(Atom::fresh(a.origin + l - 1, a.index), CounterCoeff(1)); break;
    }
    return r;
  };
  PathSummary out = p;
  out.parametric = false;
  out.length = p.length * l;
  for (auto& a : out.control)
    if (a.is_fresh()) a = band_atoms(a).terms.begin()->first;
  for (auto& e : out.data) {
    LinExpr r;
    for (const auto& [a, c] : e.terms) {
      CounterCoeff v(c.at(BigInt(l)));
      if (a.is_fresh())
        r += band_atoms(a).scaled(v);
      else
        r.add(a, v);
    }
    e = r;
  }
  return out;
}

// Theta-minus: every subexpression containing the counter is removed.
inline PathSummary drop_counter_terms(const PathSummary& s) {
  PathSummary out = s;
  for (auto& e : out.data) e = e.without_counter();
  return out;
}

// Value of a linear expression over X and Y after a summarized path.
inline LinExpr eval_output(const Expr& o, const PathSummary& s) {
  LinExpr r;
  r.add(Atom::constant(), CounterCoeff(BigInt(o.constant)));
  for (const auto& t : o.terms) {
    CounterCoeff c{BigInt(t.coeff)};
    if (t.var.kind == VarKind::control)
      r.add(s.control[t.var.index], c);
    else if (t.var.kind == VarKind::data)
      r += s.data[t.var.index].scaled(c);
    else
      throw StructureError("eval_output: output reads cur");
  }
  return r;
}

// ---------------------------------------------------------------- cycle schemes

// The l1-parts of a scheme C_{i1}^{l1} C_{i2} ... C_{it} in the output
// combination sum_j b_j y_j: mu * l1 + nu per start class that stays held
// through C_{i1}, and for the constant atom.
struct SchemeCoeffs {
  std::map<std::size_t, std::pair<BigInt, BigInt>> per_class;  // class -> (mu, nu)
  std::pair<BigInt, BigInt> constant;                          // (mu0, nu0)
  std::vector<std::string> explain;                            // one line per mu sum
};

inline SchemeCoeffs scheme_counter_coeffs(const std::vector<PathSummary>& cycles, std::size_t i1,
                                          const std::vector<std::size_t>& tail, const std::vector<BigInt>& b,
                                          const std::vector<std::string>& cycle_names = {}) {
  const PathSummary& c1 = cycles.at(i1);
  const std::size_t l = c1.num_data();
  auto lam = [&](std::size_t ci, std::size_t j) { return cycles[ci].lambda(j) == CounterCoeff(1); };
  std::vector<std::size_t> seq{i1};
  seq.insert(seq.end(), tail.begin(), tail.end());
  const std::size_t t = seq.size();
  // product of lambdas of positions after s (tail positions run once)
  auto tail_prod = [&](std::size_t s, std::size_t j) {
    for (std::size_t u = s + 1; u < t; ++u)
      if (!lam(seq[u], j)) return false;
    return true;
  };
  auto name = [&](std::size_t ci) {
    return ci < cycle_names.size() ? cycle_names[ci] : "C" + std::to_string(ci + 1);
  };
  auto num = [](const BigInt& v) { return v < 0 ? "(" + v.str() + ")" : v.str(); };
  // b x [tail lambdas] x (l1 | 1) x coefficient
  auto term = [&](const BigInt& bj, bool prod, bool l1, const BigInt& a) {
    std::string s = num(bj) + " x ";
    if (t > 1) s += std::string(prod ? "1" : "0") + " x ";
    return s + (l1 ? "l1" : "1") + " x " + num(a);
  };
  auto result = [](const BigInt& mu, const BigInt& star) {
    if (mu == 0 && star == 0) return std::string("0");
    std::string s = mu != 0 ? mu.str() + "*l1" : "";
    if (star != 0) s += (s.empty() ? "" : " + ") + star.str();
    return s;
  };

  SchemeCoeffs out;
  for (std::size_t cls = 0; cls < c1.class_count(); ++cls) {
    if (!c1.class_held(cls)) continue;
    // r_{j'}: prefix of the scheme through which the class stays held
    std::size_t r = 0;
    while (r < t && cycles[seq[r]].class_held(cls)) ++r;
    BigInt mu = 0, nu = 0, star = 0;
    std::string line = "class " + std::to_string(cls) + " via " + name(i1) + ":";
    for (std::size_t j = 0; j < l; ++j) {
      bool prod = tail_prod(0, j);
      BigInt a = c1.alpha(j, cls).c0;
      line += (j ? " + " : " ") + term(b[j], prod, lam(i1, j), a);
      if (prod) (lam(i1, j) ? mu : star) += b[j] * a;
      for (std::size_t s1 = 1; s1 < r; ++s1)
        if (tail_prod(s1, j)) nu += b[j] * cycles[seq[s1]].alpha(j, cls).c0;
      if (r < t && r > 0 && tail_prod(r, j)) nu += b[j] * cycles[seq[r]].alpha(j, cls).c0;
    }
    out.explain.push_back(line + " = " + result(mu, star));
    out.per_class[cls] = {mu, nu + star};
  }
  BigInt mu0 = 0, nu0 = 0, star0 = 0;
  std::string line = "constant via " + name(i1) + ":";
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t s1 = 0; s1 < t; ++s1) {
      if (!tail_prod(s1, j)) continue;
      BigInt e = cycles[seq[s1]].epsilon(j).c0;
      if (s1 == 0 && lam(i1, j))
        mu0 += b[j] * e;
      else if (s1 == 0)
        star0 += b[j] * e;
      else
        nu0 += b[j] * e;
    }
    line += (j ? " + " : " ") + term(b[j], tail_prod(0, j), lam(i1, j), c1.epsilon(j).c0);
  }
  out.explain.push_back(line + " = " + result(mu0, star0));
  nu0 += star0;
  out.constant = {mu0, nu0};
  return out;
}

// The same coefficients read off an explicit composition, for cross-checking.
inline SchemeCoeffs scheme_counter_coeffs_by_composition(const std::vector<PathSummary>& cycles, std::size_t i1,
                                                         const std::vector<std::size_t>& tail,
                                                         const std::vector<BigInt>& b) {
  PathSummary acc = cycle_power(cycles.at(i1));
  for (std::size_t c : tail) acc = compose(acc, cycles.at(c));
  LinExpr out;
  for (std::size_t j = 0; j < b.size(); ++j) out += acc.data[j].scaled(CounterCoeff(b[j]));
  SchemeCoeffs r;
  const PathSummary& c1 = cycles[i1];
  for (std::size_t cls = 0; cls < c1.class_count(); ++cls) {
    if (!c1.class_held(cls)) continue;
    CounterCoeff c = out.coeff(Atom::ctrl(c1.class_rep(cls)));
    r.per_class[cls] = {c.c1, c.c0};
  }
  CounterCoeff c = out.coeff(Atom::constant());
  r.constant = {c.c1, c.c0};
  return r;
}

}  // namespace redcheck
