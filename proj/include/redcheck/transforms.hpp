#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "redcheck/guard.hpp"
#include "redcheck/lang.hpp"
#include "redcheck/preorder.hpp"
#include "redcheck/snt.hpp"

namespace redcheck {

// ---------------------------------------------------------------- helpers

// y's new value as an expression over X+ and Y.
inline Expr full_rhs(const DataUpdate& u) {
  Expr e = u.expr;
  if (u.accumulate) e.add(VarRef::data(u.var), 1);
  return e;
}

inline DataUpdate make_data_update(std::size_t y, Expr full) {
  DataUpdate u{y, false, full};
  if (full.coeff(VarRef::data(y)) == 1) {
    u.accumulate = true;
    u.expr.add(VarRef::data(y), -1);
  }
  return u;
}

inline Guard substitute_guard(const Guard& g, const std::function<VarRef(VarRef)>& f) {
  Guard out;
  for (const auto& a : g) out.push_back({f(a.lhs), a.rel, f(a.rhs)});
  return out;
}

// Drops trivially true atoms and duplicates; nullopt when an atom is trivially false.
inline std::optional<Guard> simplify_guard(const Guard& g) {
  Guard out;
  for (auto a : g) {
    if (a.lhs == a.rhs) {
      if (a.rel != Rel::eq) return std::nullopt;
      continue;
    }
    if (a.rhs < a.lhs) a = {a.rhs, flip(a.rel), a.lhs};
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  }
  return out;
}

// t1 then t2 fused into one step. cur1 / cur2 say which variable stands for
// the datum each transition reads; nullopt means the transition must not read cur.
inline std::optional<Transition> compose_transitions(const Transition& t1, const Transition& t2,
                                                     std::optional<VarRef> cur1, std::optional<VarRef> cur2,
                                                     std::size_t num_control) {
  auto map_cur = [](std::optional<VarRef> c) {
    return [c](VarRef v) -> VarRef {
      if (!v.is_cur()) return v;
      if (!c) throw StructureError("fused transition reads cur at the end marker");
      return *c;
    };
  };
  auto m1 = map_cur(cur1);
  auto m2 = map_cur(cur2);
  // control values after t1, in terms of the start valuation
  auto after1 = [&](VarRef v) -> VarRef {
    if (v.kind == VarKind::control) {
      if (const auto* u = t1.ctrl_update(v.index)) return m1(u->source);
    }
    return v;
  };
  Transition t;
  t.src = t1.src;
  t.dst = t2.dst;
  t.end = t2.end;
  Guard g = substitute_guard(t1.guard, m1);
  for (const auto& a : substitute_guard(t2.guard, [&](VarRef v) { return v.is_cur() ? m2(v) : after1(v); }))
    g.push_back(a);
  auto sg = simplify_guard(g);
  if (!sg || !guard_sat(num_control, *sg)) return std::nullopt;
  t.guard = *sg;

  std::set<std::size_t> ctrl_vars, data_vars;
  for (const auto& u : t1.ctrl) ctrl_vars.insert(u.var);
  for (const auto& u : t2.ctrl) ctrl_vars.insert(u.var);
  for (const auto& u : t1.data) data_vars.insert(u.var);
  for (const auto& u : t2.data) data_vars.insert(u.var);
  for (std::size_t x : ctrl_vars) {
    VarRef src;
    if (const auto* u = t2.ctrl_update(x))
      src = u->source.is_cur() ? m2(u->source) : after1(u->source);
    else
      src = after1(VarRef::ctrl(x));
    if (!(src == VarRef::ctrl(x))) t.ctrl.push_back({x, src});
  }
  auto value1 = [&](VarRef v) -> std::optional<Expr> {
    if (v.is_cur()) return Expr::of_var(m1(v));
    if (v.kind == VarKind::control) return Expr::of_var(after1(v));
    if (const auto* u = t1.data_update(v.index)) return substitute(full_rhs(*u), [&](VarRef w) -> std::optional<Expr> {
        if (w.is_cur()) return Expr::of_var(m1(w));
        return std::nullopt;
      });
    return std::nullopt;
  };
  for (std::size_t y : data_vars) {
    Expr e;
    if (const auto* u = t2.data_update(y)) {
      e = substitute(full_rhs(*u), [&](VarRef v) -> std::optional<Expr> {
        if (v.is_cur()) return Expr::of_var(m2(v));
        return value1(v);
      });
    } else {
      auto v1 = value1(VarRef::data(y));
      e = v1 ? *v1 : Expr::of_var(VarRef::data(y));
    }
    if (e == Expr::of_var(VarRef::data(y))) continue;
    t.data.push_back(make_data_update(y, e));
  }
  return t;
}

// Renames states in BFS order from the initial state (q0, q1, ...) and drops unreachable ones.
inline Snt canonical_states(const Snt& s, const std::string& prefix = "q") {
  std::vector<std::size_t> order{s.initial};
  std::vector<std::size_t> id(s.states.size(), SIZE_MAX);
  id[s.initial] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t k : s.outgoing(order[i])) {
      std::size_t d = s.transitions[k].dst;
      if (id[d] == SIZE_MAX) {
        id[d] = order.size();
        order.push_back(d);
      }
    }
  }
  Snt out;
  out.name = s.name;
  out.control = s.control;
  out.data = s.data;
  out.links = s.links;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.add_state(prefix + std::to_string(i));
    out.output[i] = s.output[order[i]];
  }
  out.initial = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t k : s.outgoing(order[i])) {
      Transition t = s.transitions[k];
      t.src = i;
      t.dst = id[t.dst];
      out.transitions.push_back(std::move(t));
    }
  }
  return out;
}

// Keeps the states reachable from the initial one, preserving names.
inline Snt prune_unreachable(const Snt& s) {
  std::vector<bool> seen(s.states.size(), false);
  std::vector<std::size_t> todo{s.initial};
  seen[s.initial] = true;
  while (!todo.empty()) {
    std::size_t q = todo.back();
    todo.pop_back();
    for (std::size_t k : s.outgoing(q)) {
      std::size_t d = s.transitions[k].dst;
      if (!seen[d]) {
        seen[d] = true;
        todo.push_back(d);
      }
    }
  }
  Snt out;
  out.name = s.name;
  out.control = s.control;
  out.data = s.data;
  out.links = s.links;
  std::vector<std::size_t> id(s.states.size(), SIZE_MAX);
  for (std::size_t q = 0; q < s.states.size(); ++q) {
    if (!seen[q]) continue;
    id[q] = out.add_state(s.states[q]);
    out.output[id[q]] = s.output[q];
  }
  out.initial = id[s.initial];
  for (const auto& t : s.transitions) {
    if (!seen[t.src]) continue;
    Transition c = t;
    c.src = id[t.src];
    c.dst = id[t.dst];
    out.transitions.push_back(std::move(c));
  }
  return out;
}

inline std::string fresh_name(const std::vector<std::string>& taken, std::string base) {
  while (std::find(taken.begin(), taken.end(), base) != taken.end()) base += "'";
  return base;
}

// ---------------------------------------------------------------- program -> SNT

namespace detail {

// Symbolic effect of straight-line code between two `next`s.
struct SegmentEffect {
  std::vector<VarRef> ctrl;           // current source of each control variable
  std::vector<std::optional<Expr>> data;  // full new value of each data variable, if written
  Guard guard;
  bool reads_cur = false;
};

class Translator {
 public:
  explicit Translator(const ReducerProgram& p) : p_(p) {
    for (std::size_t i = 0; i < p.control_vars.size(); ++i) ctrl_[p.control_vars[i]] = i;
    for (std::size_t i = 0; i < p.data_vars.size(); ++i) data_[p.data_vars[i]] = i;
  }

  SegmentEffect identity() const {
    SegmentEffect e;
    for (std::size_t i = 0; i < ctrl_.size(); ++i) e.ctrl.push_back(VarRef::ctrl(i));
    e.data.assign(data_.size(), std::nullopt);
    return e;
  }

  // Runs one straight-line path; nullopt if the accumulated guard is unsatisfiable.
  std::optional<SegmentEffect> exec(const std::vector<Stmt>& path, SegmentEffect e) const {
    for (const auto& s : path) {
      switch (s.kind) {
        case Stmt::Kind::assume:
          for (const auto& a : s.guard) {
            VarRef l = operand(a.lhs, e), r = operand(a.rhs, e);
            if (l.is_cur() || r.is_cur()) e.reads_cur = true;
            e.guard.push_back({l, a.rel, r});
          }
          break;
        case Stmt::Kind::ctrl_assign: {
          VarRef src = operand(s.source, e);
          if (src.is_cur()) e.reads_cur = true;
          e.ctrl[ctrl_index(s.target, s.pos)] = src;
          break;
        }
        case Stmt::Kind::data_assign:
        case Stmt::Kind::data_add: {
          std::size_t y = data_index(s.target, s.pos);
          Expr rhs = expr(*s.expr, e);
          if (rhs.mentions(VarKind::cur)) e.reads_cur = true;
          if (s.kind == Stmt::Kind::data_add) rhs += e.data[y] ? *e.data[y] : Expr::of_var(VarRef::data(y));
          e.data[y] = rhs;
          break;
        }
        default: throw StructureError("translation: unexpected statement in a straight-line path");
      }
    }
    auto g = simplify_guard(e.guard);
    if (!g || !guard_sat(ctrl_.size(), *g)) return std::nullopt;
    e.guard = *g;
    return e;
  }

  Transition to_transition(const SegmentEffect& e, std::size_t src, std::size_t dst, bool end) const {
    Transition t;
    t.src = src;
    t.dst = dst;
    t.end = end;
    t.guard = e.guard;
    for (std::size_t x = 0; x < e.ctrl.size(); ++x)
      if (!(e.ctrl[x] == VarRef::ctrl(x))) t.ctrl.push_back({x, e.ctrl[x]});
    for (std::size_t y = 0; y < e.data.size(); ++y)
      if (e.data[y]) t.data.push_back(make_data_update(y, *e.data[y]));
    return t;
  }

  Expr ret_expr(const AstExpr& a) const {
    auto lin = linearize(a);
    if (!lin) throw UnsupportedError("linear-return", "return expression is not linear");
    Expr e = Expr::of_const(lin->constant);
    for (const auto& [n, c] : lin->coeffs) {
      if (n == "cur") throw ParseError(a.pos, "'ret' cannot read cur");
      e.add(var_ref(n, a.pos), c);
    }
    return e;
  }

 private:
  const ReducerProgram& p_;
  std::map<std::string, std::size_t> ctrl_, data_;

  std::size_t ctrl_index(const std::string& n, Position pos) const {
    auto it = ctrl_.find(n);
    if (it == ctrl_.end()) throw SortError(pos, "'" + n + "' is not a control variable");
    return it->second;
  }
  std::size_t data_index(const std::string& n, Position pos) const {
    auto it = data_.find(n);
    if (it == data_.end()) throw SortError(pos, "'" + n + "' is not a data variable");
    return it->second;
  }
  VarRef var_ref(const std::string& n, Position pos) const {
    if (auto it = ctrl_.find(n); it != ctrl_.end()) return VarRef::ctrl(it->second);
    return VarRef::data(data_index(n, pos));
  }
  VarRef operand(const std::string& n, const SegmentEffect& e) const {
    if (n == "cur") return VarRef::cur();
    return e.ctrl[ctrl_index(n, {})];
  }
  Expr expr(const AstExpr& a, const SegmentEffect& e) const {
    auto lin = linearize(a);
    if (!lin) throw UnsupportedError("linear-update", "nonlinear expression '" + expr_text(a) + "' in an update");
    Expr out = Expr::of_const(lin->constant);
    for (const auto& [n, c] : lin->coeffs) {
      if (n != "cur" && !ctrl_.count(n))
        throw SortError(a.pos, "update reads '" + n + "', which is not a control variable");
      out.add(operand(n, e), c);
    }
    return out;
  }
};

}  // namespace detail

// Translates a single-pass program with a linear return. States are named q0, q1, ...
// in BFS order; the loop state's end transition leads to the sink carrying the output.
inline Snt program_to_snt(const ReducerProgram& p) {
  if (p.has_init()) throw StructureError("program_to_snt: multi-pass programs are split first");
  if (p.ret.kind != ReturnExpr::Kind::linear)
    throw StructureError("program_to_snt: uninterpreted returns are checked argument by argument");
  for (const auto& seg : p.first.prefix)
    if (!stmts_linear(seg)) throw UnsupportedError("linear-update", "nonlinear update in " + p.name);
  if (!stmts_linear(p.first.loop_body)) throw UnsupportedError("linear-update", "nonlinear update in the loop of " + p.name);

  detail::Translator tr(p);
  std::vector<std::vector<Stmt>> segments = p.first.prefix;
  // a loop-first program reads the head inside the loop; unrolling once keeps
  // the initial state free of end transitions
  if (segments.empty()) segments.push_back(p.first.loop_body);
  const std::size_t m = segments.size();

  Snt s;
  s.name = p.name;
  s.control = p.control_vars;
  s.data = p.data_vars;
  for (std::size_t i = 0; i <= m + 1; ++i) s.add_state("s" + std::to_string(i));
  const std::size_t loop = m, sink = m + 1;
  s.initial = 0;
  s.output[sink] = tr.ret_expr(*p.ret.source);

  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& path : enumerate_exec_paths(segments[i])) {
      if (auto e = tr.exec(path, tr.identity())) s.transitions.push_back(tr.to_transition(*e, i, i + 1, false));
    }
    // word ends right before segment i: the rest runs with cur undefined
    if (i == 0) continue;
    std::vector<detail::SegmentEffect> effects{tr.identity()};
    for (std::size_t j = i; j < m; ++j) {
      std::vector<detail::SegmentEffect> next;
      for (const auto& e : effects)
        for (const auto& path : enumerate_exec_paths(segments[j]))
          if (auto r = tr.exec(path, e); r && !r->reads_cur) next.push_back(*r);
      effects = std::move(next);
    }
    for (const auto& e : effects) s.transitions.push_back(tr.to_transition(e, i, sink, true));
  }
  for (const auto& path : enumerate_exec_paths(p.first.loop_body))
    if (auto e = tr.exec(path, tr.identity())) s.transitions.push_back(tr.to_transition(*e, loop, loop, false));
  s.transitions.push_back(Transition{loop, sink, true, {}, {}, {}});
  return canonical_states(s);
}

// ---------------------------------------------------------------- length >= 2

// Same outputs on words of length at least two, undefined on shorter words.
inline Snt restrict_min_length(const Snt& s) {
  Snt out;
  out.name = s.name;
  out.control = s.control;
  out.data = s.data;
  out.links = s.links;
  std::map<std::pair<std::size_t, int>, std::size_t> id;
  std::deque<std::pair<std::size_t, int>> todo;
  auto state = [&](std::size_t q, int c) {
    auto key = std::make_pair(q, c);
    auto it = id.find(key);
    if (it != id.end()) return it->second;
    std::size_t n = out.add_state(c == 2 ? s.states[q] : s.states[q] + "#" + std::to_string(c));
    id[key] = n;
    todo.push_back(key);
    return n;
  };
  out.initial = state(s.initial, 0);
  while (!todo.empty()) {
    auto [q, c] = todo.front();
    todo.pop_front();
    std::size_t from = id[{q, c}];
    for (std::size_t k : s.outgoing(q)) {
      Transition t = s.transitions[k];
      if (t.end && c < 2) continue;
      t.src = from;
      t.dst = state(t.dst, t.end ? 2 : std::min(c + 1, 2));
      out.transitions.push_back(std::move(t));
    }
  }
  for (const auto& [key, n] : id)
    if (key.second == 2) out.output[n] = s.output[key.first];
  return out;
}

// ---------------------------------------------------------------- swap / rotate

// Runs like s on the word with its first two elements exchanged.
inline Snt build_swap_snt(const Snt& s) {
  Snt out = s;
  out.name = s.name + "_swap";
  std::string xp = fresh_name(s.control, "x'");
  out.control.push_back(xp);
  const std::size_t xv = out.control.size() - 1;
  const std::size_t k = out.control.size();
  std::size_t q0 = out.add_state(fresh_name(s.states, "p0"));
  std::size_t q1 = out.add_state(fresh_name(out.states, "p1"));
  out.initial = q0;
  out.transitions.push_back(Transition{q0, q1, false, {}, {CtrlUpdate{xv, VarRef::cur()}}, {}});
  for (std::size_t a : s.outgoing(s.initial)) {
    const Transition& t1 = s.transitions[a];
    if (t1.end) continue;
    for (std::size_t b : s.outgoing(t1.dst)) {
      const Transition& t2 = s.transitions[b];
      if (t2.end) continue;
      if (auto t = compose_transitions(t1, t2, VarRef::cur(), VarRef::ctrl(xv), k)) {
        t->src = q1;
        out.transitions.push_back(*t);
      }
    }
  }
  return prune_unreachable(out);
}

// Runs like s on the word with its first element moved to the end.
inline Snt build_rotate_snt(const Snt& s) {
  Snt out;
  out.name = s.name + "_rotate";
  out.states = s.states;
  out.output = s.output;
  out.control = s.control;
  out.data = s.data;
  out.links = s.links;
  std::string xp = fresh_name(s.control, "x'");
  out.control.push_back(xp);
  const std::size_t xv = out.control.size() - 1;
  const std::size_t k = out.control.size();
  std::size_t q0 = out.add_state(fresh_name(s.states, "p0"));
  out.initial = q0;
  out.transitions.push_back(Transition{q0, s.initial, false, {}, {CtrlUpdate{xv, VarRef::cur()}}, {}});
  for (const auto& t : s.transitions)
    if (!t.end) out.transitions.push_back(t);
  for (const auto& t1 : s.transitions) {
    if (t1.end) continue;
    for (std::size_t b : s.outgoing(t1.dst)) {
      const Transition& t2 = s.transitions[b];
      if (!t2.end) continue;
      if (auto t = compose_transitions(t1, t2, VarRef::ctrl(xv), std::nullopt, k)) out.transitions.push_back(*t);
    }
  }
  return prune_unreachable(out);
}

// ---------------------------------------------------------------- product

namespace detail {

// Guard pinning down a complete order type of the given symbols (control
// indices plus optionally cur) from a preorder over them.
inline Guard type_guard(const TotalPreorder& t, const std::vector<VarRef>& syms) {
  Guard g;
  for (std::size_t r = 0; r < t.class_count(); ++r) {
    auto members = t.class_members(r);
    for (std::size_t i = 1; i < members.size(); ++i) g.push_back({syms[members[0]], Rel::eq, syms[members[i]]});
    if (r + 1 < t.class_count()) g.push_back({syms[members[0]], Rel::lt, syms[t.class_members(r + 1)[0]]});
  }
  return g;
}

// Order types of X (plus cur unless end) that no guard of q's transitions admits.
inline std::vector<Guard> uncovered_types(const Snt& s, std::size_t q, bool end) {
  std::vector<VarRef> syms;
  for (std::size_t i = 0; i < s.num_control(); ++i) syms.push_back(VarRef::ctrl(i));
  if (!end) syms.push_back(VarRef::cur());
  std::vector<Guard> guards;
  for (std::size_t k : s.outgoing(q))
    if (s.transitions[k].end == end) guards.push_back(s.transitions[k].guard);
  std::vector<Guard> out;
  for (const auto& t : all_preorders(syms.size())) {
    Guard g = type_guard(t, syms);
    bool covered = false;
    for (const auto& h : guards)
      if (guard_sat(s.num_control(), g, h)) {
        covered = true;
        break;
      }
    if (!covered) out.push_back(g);
  }
  return out;
}

inline Guard shift_guard(const Guard& g, std::size_t offset) {
  Guard out;
  for (auto a : g) {
    if (a.lhs.kind == VarKind::control) a.lhs.index += offset;
    if (a.rhs.kind == VarKind::control) a.rhs.index += offset;
    out.push_back(a);
  }
  return out;
}

inline Expr shift_expr(const Expr& e, std::size_t coff, std::size_t doff) {
  return substitute(e, [&](VarRef v) -> std::optional<Expr> {
    if (v.kind == VarKind::control) return Expr::of_var(VarRef::ctrl(v.index + coff));
    if (v.kind == VarKind::data) return Expr::of_var(VarRef::data(v.index + doff));
    return std::nullopt;
  });
}

inline void append_effects(Transition& into, const Transition& t, std::size_t coff, std::size_t doff) {
  for (auto u : t.ctrl) {
    u.var += coff;
    if (u.source.kind == VarKind::control) u.source.index += coff;
    into.ctrl.push_back(u);
  }
  for (auto u : t.data) {
    u.var += doff;
    u.expr = shift_expr(u.expr, coff, doff);
    into.data.push_back(u);
  }
}

}  // namespace detail

// Product machine whose output is O1 - O2 where both are defined and 1 where
// exactly one is. A side that gets stuck moves to a dead state so the other
// side's run is still followed.
inline Snt product(const Snt& a, const Snt& b) {
  Snt out;
  out.name = a.name + "_x_" + b.name;
  for (const auto& x : a.control) out.control.push_back(x + ".1");
  for (const auto& x : b.control) out.control.push_back(x + ".2");
  for (const auto& y : a.data) out.data.push_back(y + ".1");
  for (const auto& y : b.data) out.data.push_back(y + ".2");
  for (const auto& [u, v] : a.links) out.links.emplace_back(u + ".1", v + ".1");
  for (const auto& [u, v] : b.links) out.links.emplace_back(u + ".2", v + ".2");
  for (std::size_t i = 0; i < a.control.size(); ++i)
    for (std::size_t j = 0; j < b.control.size(); ++j)
      if (a.control[i] == b.control[j]) out.links.emplace_back(a.control[i] + ".1", b.control[j] + ".2");
  for (std::size_t i = 0; i < a.data.size(); ++i)
    for (std::size_t j = 0; j < b.data.size(); ++j)
      if (a.data[i] == b.data[j]) out.links.emplace_back(a.data[i] + ".1", b.data[j] + ".2");

  const std::size_t ka = a.num_control(), la = a.num_data();
  const std::size_t k = out.control.size();
  constexpr std::size_t kDead = SIZE_MAX;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> id;
  std::deque<std::pair<std::size_t, std::size_t>> todo;
  auto state = [&](std::size_t p, std::size_t q) {
    auto key = std::make_pair(p, q);
    if (auto it = id.find(key); it != id.end()) return it->second;
    std::string n = "(" + (p == kDead ? std::string("dead") : a.states[p]) + "," +
                    (q == kDead ? std::string("dead") : b.states[q]) + ")";
    std::size_t i = out.add_state(n);
    id[key] = i;
    todo.push_back(key);
    const auto* oa = p == kDead ? nullptr : &a.output[p];
    const auto* ob = q == kDead ? nullptr : &b.output[q];
    bool da = oa && oa->has_value(), db = ob && ob->has_value();
    if (da && db)
      out.output[i] = detail::shift_expr(**oa, 0, 0) - detail::shift_expr(**ob, ka, la);
    else if (da != db)
      out.output[i] = Expr::of_const(1);
    return i;
  };
  out.initial = state(a.initial, b.initial);

  auto emit = [&](std::size_t from, const Transition* ta, const Transition* tb, const Guard& extra_a,
                  const Guard& extra_b, bool end, std::size_t dp, std::size_t dq) {
    Transition t;
    t.end = end;
    if (ta) t.guard = ta->guard;
    for (const auto& g : extra_a) t.guard.push_back(g);
    Guard gb = tb ? detail::shift_guard(tb->guard, ka) : Guard{};
    for (const auto& g : detail::shift_guard(extra_b, ka)) gb.push_back(g);
    for (const auto& g : gb) t.guard.push_back(g);
    if (!guard_sat(k, t.guard)) return;
    if (ta) detail::append_effects(t, *ta, 0, 0);
    if (tb) detail::append_effects(t, *tb, ka, la);
    t.src = from;
    t.dst = state(dp, dq);
    out.transitions.push_back(std::move(t));
  };

  while (!todo.empty()) {
    auto [p, q] = todo.front();
    todo.pop_front();
    std::size_t from = id[{p, q}];
    for (bool end : {false, true}) {
      std::vector<const Transition*> as, bs;
      if (p != kDead)
        for (std::size_t i : a.outgoing(p))
          if (a.transitions[i].end == end) as.push_back(&a.transitions[i]);
      if (q != kDead)
        for (std::size_t i : b.outgoing(q))
          if (b.transitions[i].end == end) bs.push_back(&b.transitions[i]);
      for (const auto* ta : as)
        for (const auto* tb : bs) emit(from, ta, tb, {}, {}, end, ta->dst, tb->dst);
      // one side stuck or already dead: follow the other side alone
      std::vector<Guard> miss_a = p == kDead ? std::vector<Guard>{Guard{}} : detail::uncovered_types(a, p, end);
      std::vector<Guard> miss_b = q == kDead ? std::vector<Guard>{Guard{}} : detail::uncovered_types(b, q, end);
      if (q != kDead)
        for (const auto& g : miss_a)
          for (const auto* tb : bs) emit(from, nullptr, tb, g, {}, end, kDead, tb->dst);
      if (p != kDead)
        for (const auto& g : miss_b)
          for (const auto* ta : as) emit(from, ta, nullptr, {}, g, end, ta->dst, kDead);
    }
  }
  return out;
}

// ---------------------------------------------------------------- normalization

struct NormalizedSnt {
  Snt snt;
  std::vector<TotalPreorder> preorder;  // per state
  TotalPreorder initial;
};

inline std::vector<TotalPreorder> initial_preorders(const Snt& s) {
  std::vector<std::pair<std::size_t, std::size_t>> linked;
  for (const auto& [u, v] : s.links) {
    auto a = s.var(u), b = s.var(v);
    if (a && b && a->kind == VarKind::control && b->kind == VarKind::control) linked.emplace_back(a->index, b->index);
  }
  std::vector<TotalPreorder> out;
  for (const auto& t : all_preorders(s.num_control())) {
    bool ok = true;
    for (const auto& [i, j] : linked) ok = ok && t.equiv(i, j);
    if (ok) out.push_back(t);
  }
  return out;
}

namespace detail {

inline Guard preorder_guard(const TotalPreorder& t) {
  std::vector<VarRef> syms;
  for (std::size_t i = 0; i < t.size(); ++i) syms.push_back(VarRef::ctrl(i));
  return type_guard(t, syms);
}

// Position of cur relative to the classes: 2i means equal to class i, 2i+1
// lies strictly above it (and below class i+1 if any), -1 below all.
inline Guard cur_row(const TotalPreorder& t, long pos) {
  Guard g;
  for (std::size_t i = 0; i < t.size(); ++i) {
    long r = 2 * static_cast<long>(t.rank(i));
    Rel rel = pos == r ? Rel::eq : (pos < r ? Rel::lt : Rel::gt);
    g.push_back({VarRef::cur(), rel, VarRef::ctrl(i)});
  }
  return g;
}

inline TotalPreorder successor_preorder(const TotalPreorder& t, const Transition& tr, long cur_pos) {
  std::vector<std::size_t> r(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    long v = 2 * static_cast<long>(t.rank(i));
    if (const auto* u = tr.ctrl_update(i)) v = u->source.is_cur() ? cur_pos : 2 * static_cast<long>(t.rank(u->source.index));
    r[i] = static_cast<std::size_t>(v + 1);
  }
  return TotalPreorder(r);
}

}  // namespace detail

// One machine per admissible initial preorder over Q x TPO(X). Guards become
// complete cur rows, end transitions become guard-free.
inline NormalizedSnt normalize_from(const Snt& s, const TotalPreorder& init) {
  const std::size_t k = s.num_control();
  NormalizedSnt out;
  out.initial = init;
  out.snt.name = s.name;
  out.snt.control = s.control;
  out.snt.data = s.data;
  out.snt.links = s.links;
  std::map<std::pair<std::size_t, TotalPreorder>, std::size_t> id;
  std::deque<std::pair<std::size_t, TotalPreorder>> todo;
  auto state = [&](std::size_t q, const TotalPreorder& t) {
    auto key = std::make_pair(q, t);
    if (auto it = id.find(key); it != id.end()) return it->second;
    std::string n = s.states[q];
    if (k > 1) n += "[" + t.to_string(s.control) + "]";
    std::size_t i = out.snt.add_state(n);
    out.snt.output[i] = s.output[q];
    out.preorder.push_back(t);
    id[key] = i;
    todo.push_back(key);
    return i;
  };
  out.snt.initial = state(s.initial, init);
  while (!todo.empty()) {
    auto [q, t] = todo.front();
    todo.pop_front();
    std::size_t from = id[{q, t}];
    Guard phi = detail::preorder_guard(t);
    const long m = static_cast<long>(t.class_count());
    for (std::size_t ti : s.outgoing(q)) {
      const Transition& tr = s.transitions[ti];
      if (tr.end) {
        if (!guard_sat(k, phi, tr.guard)) continue;
        Transition nt = tr;
        nt.guard.clear();
        nt.src = from;
        nt.dst = state(tr.dst, detail::successor_preorder(t, tr, 0));
        out.snt.transitions.push_back(std::move(nt));
        continue;
      }
      for (long pos = -1; pos < std::max(2 * m, 1L); ++pos) {
        if (m == 0 && pos != 0) continue;
        Guard row = detail::cur_row(t, pos);
        if (!guard_sat(k, phi, row)) continue;
        Guard both = phi;
        both.insert(both.end(), row.begin(), row.end());
        if (!guard_sat(k, both, tr.guard)) continue;
        Transition nt = tr;
        nt.guard = row;
        nt.src = from;
        nt.dst = state(tr.dst, detail::successor_preorder(t, tr, pos));
        out.snt.transitions.push_back(std::move(nt));
      }
    }
  }
  return out;
}

inline std::vector<NormalizedSnt> normalize(const Snt& s) {
  std::vector<NormalizedSnt> out;
  for (const auto& t : initial_preorders(s)) out.push_back(normalize_from(s, t));
  return out;
}

// ---------------------------------------------------------------- multi-pass

struct MultipassSplit {
  ReducerProgram phase1;  // returns the tuple of values phase 2 depends on
  ReducerProgram phase2;  // reads those values as never-assigned control variables
  std::vector<std::string> crossing;
};

namespace detail {

inline void written_in(const std::vector<Stmt>& ss, std::set<std::string>& out) {
  for (const auto& s : ss) {
    if (s.kind == Stmt::Kind::data_assign || s.kind == Stmt::Kind::data_add || s.kind == Stmt::Kind::ctrl_assign)
      out.insert(s.target);
    written_in(s.then_branch, out);
    written_in(s.else_branch, out);
  }
}

inline void read_in(const std::vector<Stmt>& ss, std::set<std::string>& out) {
  for (const auto& s : ss) {
    for (const auto& a : s.guard) {
      out.insert(a.lhs);
      out.insert(a.rhs);
    }
    if (s.kind == Stmt::Kind::ctrl_assign) out.insert(s.source);
    if (s.expr) {
      std::vector<std::string> names;
      collect_names(*s.expr, names);
      out.insert(names.begin(), names.end());
    }
    read_in(s.then_branch, out);
    read_in(s.else_branch, out);
  }
}

inline void phase_sets(const Phase& ph, std::set<std::string>& written, std::set<std::string>& read) {
  for (const auto& seg : ph.prefix) {
    written_in(seg, written);
    read_in(seg, read);
  }
  written_in(ph.loop_body, written);
  read_in(ph.loop_body, read);
}

}  // namespace detail

inline MultipassSplit check_multipass(const ReducerProgram& p) {
  if (!p.has_init()) throw StructureError("check_multipass: program has no 'init'");
  std::set<std::string> w1, r1, w2, r2;
  detail::phase_sets(p.first, w1, r1);
  std::map<std::string, AstExprPtr> bridge;
  for (const auto& b : p.bridge) {
    w1.insert(b.target);
    bridge[b.target] = b.expr;
  }
  detail::phase_sets(*p.second, w2, r2);
  {
    std::vector<std::string> names;
    collect_names(*p.ret.source, names);
    r2.insert(names.begin(), names.end());
  }
  MultipassSplit out;
  for (const auto& v : all_variables(p))
    if (w1.count(v) && r2.count(v)) out.crossing.push_back(v);

  out.phase1.name = p.name + "_phase1";
  out.phase1.control_vars = p.control_vars;
  out.phase1.data_vars = p.data_vars;
  out.phase1.first = p.first;
  out.phase1.ret.kind = ReturnExpr::Kind::uninterpreted;
  out.phase1.ret.function = "tuple";
  for (const auto& v : out.crossing) {
    if (p.is_control(v) && !bridge.count(v))
      throw UnsupportedError("multipass", "crossing variable '" + v + "' has control sort in the first pass");
    if (auto it = bridge.find(v); it != bridge.end()) {
      ReturnExpr leaves;
      std::vector<AstExprPtr> tmp;
      std::function<void(const AstExprPtr&)> flat = [&](const AstExprPtr& e) {
        if (linearize(*e)) {
          tmp.push_back(e);
          return;
        }
        for (const auto& a : e->args) flat(a);
      };
      flat(it->second);
      for (const auto& e : tmp) out.phase1.ret.args.push_back(e);
    } else {
      out.phase1.ret.args.push_back(make_var(v));
    }
  }
  if (out.phase1.ret.args.empty()) out.phase1.ret.args.push_back(make_num(0));
  if (out.phase1.ret.args.size() == 1 && linearize(*out.phase1.ret.args[0])) {
    out.phase1.ret.kind = ReturnExpr::Kind::linear;
    out.phase1.ret.function.clear();
  }
  out.phase1.ret.source = out.phase1.ret.args.size() == 1
                              ? out.phase1.ret.args[0]
                              : make_op(AstExpr::Kind::call, out.phase1.ret.args, {}, "tuple");

  out.phase2.name = p.name + "_phase2";
  out.phase2.first = *p.second;
  out.phase2.ret = p.ret;
  std::set<std::string> frozen;
  for (const auto& v : out.crossing)
    if (!w2.count(v)) frozen.insert(v);
  for (const auto& v : p.second_control) out.phase2.control_vars.push_back(v);
  for (const auto& v : frozen)
    if (!out.phase2.is_control(v)) out.phase2.control_vars.push_back(v);
  for (const auto& v : p.second_data)
    if (!frozen.count(v)) out.phase2.data_vars.push_back(v);
  return out;
}

}  // namespace redcheck
