#pragma once

#include <algorithm>
#include <functional>
#include <tuple>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "redcheck/core.hpp"
#include "redcheck/guard.hpp"
#include "redcheck/lexer.hpp"

namespace redcheck {

// y := expr, or y := y + expr when accumulate is set. A well-formed expr reads X+ only.
struct DataUpdate {
  std::size_t var = 0;
  bool accumulate = false;
  Expr expr;
};

// x := source, where source is cur or a control variable.
struct CtrlUpdate {
  std::size_t var = 0;
  VarRef source;
};

struct Transition {
  std::size_t src = 0;
  std::size_t dst = 0;
  bool end = false;
  Guard guard;
  std::vector<CtrlUpdate> ctrl;
  std::vector<DataUpdate> data;

  const CtrlUpdate* ctrl_update(std::size_t x) const {
    for (const auto& u : ctrl)
      if (u.var == x) return &u;
    return nullptr;
  }
  const DataUpdate* data_update(std::size_t y) const {
    for (const auto& u : data)
      if (u.var == y) return &u;
    return nullptr;
  }
};

struct Snt {
  std::string name = "snt";
  std::vector<std::string> states;
  std::vector<std::string> control;
  std::vector<std::string> data;
  std::vector<Transition> transitions;
  std::size_t initial = 0;
  std::vector<std::optional<Expr>> output;  // per state, over X and Y
  // Variables whose initial values coincide (same-named variables of compared machines).
  std::vector<std::pair<std::string, std::string>> links;

  std::size_t num_control() const { return control.size(); }
  std::size_t num_data() const { return data.size(); }

  std::size_t add_state(std::string n) {
    states.push_back(std::move(n));
    output.emplace_back();
    return states.size() - 1;
  }

  std::optional<std::size_t> state_index(const std::string& n) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == n) return i;
    return std::nullopt;
  }
  std::optional<VarRef> var(const std::string& n) const {
    if (n == "cur") return VarRef::cur();
    for (std::size_t i = 0; i < control.size(); ++i)
      if (control[i] == n) return VarRef::ctrl(i);
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i] == n) return VarRef::data(i);
    return std::nullopt;
  }
  std::string var_name(VarRef v) const {
    switch (v.kind) {
      case VarKind::cur: return "cur";
      case VarKind::control: return control.at(v.index);
      case VarKind::data: return data.at(v.index);
    }
    return "?";
  }

  std::vector<std::size_t> outgoing(std::size_t q) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < transitions.size(); ++i)
      if (transitions[i].src == q) out.push_back(i);
    return out;
  }
  bool is_sink(std::size_t q) const {
    for (const auto& t : transitions)
      if (t.src == q) return false;
    return true;
  }
};

// ---------------------------------------------------------------- run

struct SntValuation {
  std::vector<Value> control;
  std::vector<Value> data;
};

inline Value eval(const Expr& e, const SntValuation& v, std::optional<Value> cur) {
  Value r = e.constant;
  for (const auto& t : e.terms) {
    Value x = 0;
    switch (t.var.kind) {
      case VarKind::cur:
        if (!cur) throw StructureError("expression reads cur at the end marker");
        x = *cur;
        break;
      case VarKind::control: x = v.control.at(t.var.index); break;
      case VarKind::data: x = v.data.at(t.var.index); break;
    }
    r = checked_add(r, checked_mul(t.coeff, x));
  }
  return r;
}

// Applies a transition's assignment simultaneously.
inline SntValuation apply(const Transition& t, const SntValuation& v, std::optional<Value> cur) {
  SntValuation out = v;
  for (const auto& u : t.ctrl) {
    if (u.source.is_cur()) {
      if (!cur) throw StructureError("control update reads cur at the end marker");
      out.control[u.var] = *cur;
    } else {
      out.control[u.var] = v.control.at(u.source.index);
    }
  }
  for (const auto& u : t.data) {
    Value e = eval(u.expr, v, cur);
    out.data[u.var] = u.accumulate ? checked_add(v.data[u.var], e) : e;
  }
  return out;
}

inline bool enabled(const Transition& t, const SntValuation& v, std::optional<Value> cur) {
  if (t.end != !cur.has_value()) return false;
  return guard_holds(t.guard, [&](VarRef r) -> Value {
    if (r.is_cur()) {
      if (!cur) throw StructureError("guard reads cur at the end marker");
      return *cur;
    }
    return v.control.at(r.index);
  });
}

struct RunTrace {
  std::vector<std::size_t> transitions;
  std::vector<SntValuation> valuations;  // before each step, then the final one
  std::optional<Value> output;
  bool stuck = false;
};

inline RunTrace run_trace(const Snt& s, const std::vector<Value>& w, const SntValuation& rho0) {
  RunTrace tr;
  std::size_t q = s.initial;
  SntValuation v = rho0;
  v.control.resize(s.num_control(), 0);
  v.data.resize(s.num_data(), 0);
  for (std::size_t i = 0; i <= w.size(); ++i) {
    std::optional<Value> cur;
    if (i < w.size()) cur = w[i];
    const Transition* taken = nullptr;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < s.transitions.size(); ++k) {
      const auto& t = s.transitions[k];
      if (t.src == q && enabled(t, v, cur)) {
        taken = &t;
        idx = k;
        break;
      }
    }
    tr.valuations.push_back(v);
    if (!taken) {
      tr.stuck = true;
      return tr;
    }
    tr.transitions.push_back(idx);
    v = apply(*taken, v, cur);
    q = taken->dst;
  }
  tr.valuations.push_back(v);
  if (s.output[q]) tr.output = eval(*s.output[q], v, std::nullopt);
  return tr;
}

inline std::optional<Value> run(const Snt& s, const std::vector<Value>& w, const SntValuation& rho0) {
  return run_trace(s, w, rho0).output;
}

inline SntValuation valuation_from_names(const Snt& s, const std::map<std::string, Value>& rho0) {
  SntValuation v{std::vector<Value>(s.num_control(), 0), std::vector<Value>(s.num_data(), 0)};
  for (const auto& [n, val] : rho0) {
    auto r = s.var(n);
    if (!r || r->is_cur()) continue;
    (r->kind == VarKind::control ? v.control : v.data)[r->index] = val;
  }
  return v;
}

inline std::optional<Value> run(const Snt& s, const std::vector<Value>& w,
                                const std::map<std::string, Value>& rho0 = {}) {
  return run(s, w, valuation_from_names(s, rho0));
}

// Copies the first variable of each link onto the second.
inline void apply_links(const Snt& s, SntValuation& v) {
  for (const auto& [a, b] : s.links) {
    auto ra = s.var(a), rb = s.var(b);
    if (!ra || !rb || ra->kind != rb->kind || ra->is_cur()) continue;
    auto& vec = ra->kind == VarKind::control ? v.control : v.data;
    vec[rb->index] = vec[ra->index];
  }
}

// ---------------------------------------------------------------- structure

// Strongly connected components of the transition graph without end transitions.
inline std::vector<std::size_t> scc_ids(const Snt& s, std::size_t* count = nullptr) {
  std::size_t n = s.states.size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& t : s.transitions)
    if (!t.end) succ[t.src].push_back(t.dst);
  std::vector<std::size_t> index(n, SIZE_MAX), low(n, 0), comp(n, SIZE_MAX);
  std::vector<bool> on(n, false);
  std::vector<std::size_t> stack;
  std::size_t next_index = 0, ncomp = 0;
  struct Frame {
    std::size_t v, i;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != SIZE_MAX) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.i < succ[f.v].size()) {
        std::size_t w = succ[f.v][f.i++];
        if (index[w] == SIZE_MAX) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on[w] = true;
          call.push_back({w, 0});
        } else if (on[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        while (true) {
          std::size_t w = stack.back();
          stack.pop_back();
          on[w] = false;
          comp[w] = ncomp;
          if (w == v) break;
        }
        ++ncomp;
      }
    }
  }
  if (count) *count = ncomp;
  return comp;
}

struct Violation {
  std::string constraint;
  std::string message;
};

namespace detail {

inline std::string guard_text(const Snt& s, const Guard& g) {
  std::string out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) out += " & ";
    out += s.var_name(g[i].lhs) + " " + rel_text(g[i].rel) + " " + s.var_name(g[i].rhs);
  }
  return out;
}

inline std::string transition_text(const Snt& s, std::size_t k) {
  const auto& t = s.transitions[k];
  std::string g = t.end ? (t.guard.empty() ? "end" : "end & " + guard_text(s, t.guard))
                        : (t.guard.empty() ? "true" : guard_text(s, t.guard));
  return s.states[t.src] + " -> " + s.states[t.dst] + " [" + g + "]";
}

// Relation of cur to control variable x required by the guard, if any atom fixes it.
inline std::optional<Rel> cur_relation(const Guard& g, std::size_t x) {
  for (const auto& a : g) {
    if (a.lhs.is_cur() && a.rhs.kind == VarKind::control && a.rhs.index == x) return a.rel;
    if (a.rhs.is_cur() && a.lhs.kind == VarKind::control && a.lhs.index == x) return flip(a.rel);
  }
  return std::nullopt;
}

}  // namespace detail

// Checks determinism, sink targets of end transitions, generalized flatness,
// the copyless update shape and monotonicity of every loop bundle.
//
// A control variable that no transition of an SCC assigns is frozen there and
// is exempt from the per-loop cur-atom requirement.
inline std::vector<Violation> validate(const Snt& s) {
  std::vector<Violation> out;
  const std::size_t k = s.num_control();
  auto tx = [&](std::size_t i) { return detail::transition_text(s, i); };

  if (s.initial >= s.states.size()) out.push_back({"well-formed", "initial state out of range"});
  if (s.output.size() != s.states.size()) out.push_back({"well-formed", "output map size mismatch"});
  for (std::size_t i = 0; i < s.transitions.size(); ++i) {
    const auto& t = s.transitions[i];
    if (t.src >= s.states.size() || t.dst >= s.states.size()) {
      out.push_back({"well-formed", "transition " + std::to_string(i) + " has an unknown state"});
      return out;
    }
    std::set<std::size_t> cv, dv;
    for (const auto& u : t.ctrl) {
      if (!cv.insert(u.var).second) out.push_back({"well-formed", tx(i) + ": control variable assigned twice"});
      if (t.end && u.source.is_cur()) out.push_back({"end-transition", tx(i) + ": assigns cur at the end marker"});
    }
    for (const auto& u : t.data) {
      if (!dv.insert(u.var).second) out.push_back({"well-formed", tx(i) + ": data variable assigned twice"});
      if (u.expr.mentions(VarKind::data))
        out.push_back({"copyless", tx(i) + ": update of " + s.data[u.var] + " reads data variables"});
      if (t.end && u.expr.mentions(VarKind::cur))
        out.push_back({"end-transition", tx(i) + ": reads cur at the end marker"});
    }
    if (t.end) {
      for (const auto& a : t.guard)
        if (a.lhs.is_cur() || a.rhs.is_cur())
          out.push_back({"end-transition", tx(i) + ": end guard mentions cur"});
      if (!s.is_sink(t.dst)) out.push_back({"sink", tx(i) + ": end transition target is not a sink"});
    }
  }

  for (std::size_t q = 0; q < s.states.size(); ++q) {
    auto outs = s.outgoing(q);
    for (std::size_t a = 0; a < outs.size(); ++a) {
      for (std::size_t b = a + 1; b < outs.size(); ++b) {
        const auto& ta = s.transitions[outs[a]];
        const auto& tb = s.transitions[outs[b]];
        if (ta.end != tb.end) continue;
        if (guard_sat(k, ta.guard, tb.guard))
          out.push_back({"deterministic", tx(outs[a]) + " overlaps " + tx(outs[b])});
      }
    }
  }

  std::size_t ncomp = 0;
  auto comp = scc_ids(s, &ncomp);
  std::vector<std::vector<std::size_t>> members(ncomp);
  for (std::size_t q = 0; q < s.states.size(); ++q) members[comp[q]].push_back(q);
  for (std::size_t c = 0; c < ncomp; ++c) {
    std::vector<std::size_t> inner;
    for (std::size_t i = 0; i < s.transitions.size(); ++i) {
      const auto& t = s.transitions[i];
      if (!t.end && comp[t.src] == c && comp[t.dst] == c) inner.push_back(i);
    }
    if (inner.empty()) continue;
    if (members[c].size() > 1) {
      out.push_back({"generalized-flat", "states " + s.states[members[c][0]] + " and " + s.states[members[c][1]] +
                                             " lie on a cycle longer than one"});
    }
    std::vector<bool> assigned(k, false);
    for (std::size_t i : inner) {
      const auto& t = s.transitions[i];
      for (const auto& a : t.guard) {
        bool cur_atom = (a.lhs.is_cur() && a.rhs.kind == VarKind::control) ||
                        (a.rhs.is_cur() && a.lhs.kind == VarKind::control);
        if (!cur_atom) out.push_back({"monotone", tx(i) + ": loop guard atom does not compare cur"});
      }
      for (const auto& u : t.ctrl) {
        assigned[u.var] = true;
        if (!u.source.is_cur()) out.push_back({"monotone", tx(i) + ": loop copies a control variable"});
      }
    }
    for (std::size_t x = 0; x < k; ++x) {
      if (!assigned[x]) continue;
      bool gt_assign = false, gt_keep = false, lt_assign = false, lt_keep = false;
      for (std::size_t i : inner) {
        const auto& t = s.transitions[i];
        auto r = detail::cur_relation(t.guard, x);
        if (!r) {
          out.push_back({"monotone", tx(i) + ": loop guard does not compare cur with " + s.control[x]});
          continue;
        }
        bool assigns = t.ctrl_update(x) != nullptr;
        if (*r == Rel::gt) (assigns ? gt_assign : gt_keep) = true;
        if (*r == Rel::lt) (assigns ? lt_assign : lt_keep) = true;
      }
      std::string where = "loop bundle at " + s.states[members[c][0]];
      if (gt_assign && gt_keep)
        out.push_back({"monotone", where + ": " + s.control[x] + " is updated by some but not all cur > loops"});
      if (lt_assign && lt_keep)
        out.push_back({"monotone", where + ": " + s.control[x] + " is updated by some but not all cur < loops"});
      if (gt_assign && lt_assign)
        out.push_back({"monotone", where + ": " + s.control[x] + " tracks both the maximum and the minimum"});
    }
  }
  return out;
}

// ---------------------------------------------------------------- multi-lassos

struct LassoStage {
  std::vector<std::size_t> handle;  // transitions leading to the junction
  std::size_t junction = 0;
  std::vector<std::size_t> bundle;  // self-loops at the junction
};

struct MultiLasso {
  std::vector<LassoStage> stages;
  std::size_t end_transition = 0;

  std::size_t last_junction() const { return stages.back().junction; }
};

// One multi-lasso per simple path from the initial state to an end transition.
// Every state with self-loops on the path is a junction; the end source is
// always the last junction.
inline std::vector<MultiLasso> classify(const Snt& s) {
  std::size_t ncomp = 0;
  auto comp = scc_ids(s, &ncomp);
  std::vector<std::size_t> size(ncomp, 0);
  for (auto c : comp) ++size[c];
  for (std::size_t q = 0; q < s.states.size(); ++q)
    if (size[comp[q]] > 1) throw StructureError("classify: state " + s.states[q] + " lies on a cycle longer than one");

  std::vector<std::vector<std::size_t>> loops(s.states.size());
  for (std::size_t i = 0; i < s.transitions.size(); ++i) {
    const auto& t = s.transitions[i];
    if (!t.end && t.src == t.dst) loops[t.src].push_back(i);
  }

  std::vector<MultiLasso> out;
  std::vector<std::size_t> path;
  std::function<void(std::size_t)> dfs = [&](std::size_t q) {
    for (std::size_t i : s.outgoing(q)) {
      const auto& t = s.transitions[i];
      if (t.end) {
        MultiLasso ml;
        LassoStage cur_stage;
        std::size_t at = s.initial;
        auto close = [&](std::size_t state) {
          cur_stage.junction = state;
          cur_stage.bundle = loops[state];
          ml.stages.push_back(cur_stage);
          cur_stage = LassoStage{};
        };
        if (!loops[at].empty() && !path.empty()) close(at);
        for (std::size_t e : path) {
          cur_stage.handle.push_back(e);
          at = s.transitions[e].dst;
          if (!loops[at].empty() && at != q) close(at);
        }
        close(q);
        ml.end_transition = i;
        out.push_back(std::move(ml));
        continue;
      }
      if (t.src == t.dst) continue;
      path.push_back(i);
      dfs(t.dst);
      path.pop_back();
    }
  };
  dfs(s.initial);
  return out;
}

// ---------------------------------------------------------------- text format

namespace detail {

class SntParser {
 public:
  explicit SntParser(std::string_view text) : ts_(tokenize(text)) {}

  Snt parse() {
    Snt s;
    ts_.expect("snt");
    s.name = ts_.expect_ident().text;
    ts_.expect("{");
    std::optional<std::string> init;
    struct PendingTx {
      std::string src, dst;
      bool end;
      std::vector<std::tuple<std::string, Rel, std::string, Position>> atoms;
      std::vector<std::tuple<std::string, bool, std::map<std::string, Value>, Value, Position>> assigns;
    };
    std::vector<PendingTx> txs;
    std::vector<std::tuple<std::string, std::map<std::string, Value>, Value, Position>> outs;
    while (!ts_.is("}")) {
      if (ts_.at_end()) ts_.fail({"}"});
      if (ts_.accept("control")) {
        names(s.control);
      } else if (ts_.accept("data")) {
        names(s.data);
      } else if (ts_.accept("init")) {
        init = ts_.expect_ident().text;
        ts_.expect(";");
      } else if (ts_.accept("output")) {
        Position pos = ts_.peek().pos;
        std::string q = ts_.expect_ident().text;
        ts_.expect("=");
        auto [coeffs, c] = linear();
        ts_.expect(";");
        outs.emplace_back(q, coeffs, c, pos);
      } else if (ts_.accept("link")) {
        std::string a = ts_.expect_ident().text;
        std::string b = ts_.expect_ident().text;
        ts_.expect(";");
        s.links.emplace_back(a, b);
      } else {
        PendingTx t;
        t.src = ts_.expect_ident().text;
        ts_.expect("->");
        t.dst = ts_.expect_ident().text;
        ts_.expect("[");
        t.end = false;
        if (!ts_.is("]")) {
          do {
            if (ts_.accept("end")) {
              t.end = true;
            } else if (ts_.accept("true")) {
            } else {
              Position pos = ts_.peek().pos;
              std::string l = ts_.expect_ident().text;
              Rel r;
              if (ts_.accept("<"))
                r = Rel::lt;
              else if (ts_.accept(">"))
                r = Rel::gt;
              else if (ts_.accept("=") || ts_.accept("=="))
                r = Rel::eq;
              else
                ts_.fail({"<", ">", "="});
              std::string rr = ts_.expect_ident().text;
              t.atoms.emplace_back(l, r, rr, pos);
            }
          } while (ts_.accept("&") || ts_.accept("&&"));
        }
        ts_.expect("]");
        ts_.expect("{");
        while (!ts_.accept("}")) {
          Position pos = ts_.peek().pos;
          std::string v = ts_.expect_ident().text;
          bool add = false;
          if (ts_.accept("+="))
            add = true;
          else
            ts_.expect(":=");
          auto [coeffs, c] = linear();
          ts_.expect(";");
          t.assigns.emplace_back(v, add, coeffs, c, pos);
        }
        ts_.accept(";");
        txs.push_back(std::move(t));
      }
    }
    ts_.expect("}");
    if (!ts_.at_end()) throw ParseError(ts_.peek().pos, "unexpected input after snt block");
    if (!init) throw ParseError(ts_.peek().pos, "missing 'init' declaration");

    auto state = [&](const std::string& n) {
      if (auto i = s.state_index(n)) return *i;
      return s.add_state(n);
    };
    s.initial = state(*init);
    for (const auto& t : txs) {
      state(t.src);
      state(t.dst);
    }
    for (const auto& p : txs) {
      Transition t;
      t.src = *s.state_index(p.src);
      t.dst = *s.state_index(p.dst);
      t.end = p.end;
      for (const auto& [l, r, rr, pos] : p.atoms) t.guard.push_back({guard_var(s, l, pos), r, guard_var(s, rr, pos)});
      for (const auto& [v, add, coeffs, c, pos] : p.assigns) {
        auto ref = s.var(v);
        if (!ref || ref->is_cur()) throw ParseError(pos, "unknown variable '" + v + "'");
        Expr e = to_expr(s, coeffs, c, pos);
        if (ref->kind == VarKind::control) {
          if (add || e.constant != 0 || e.terms.size() != 1 || e.terms[0].coeff != 1 ||
              e.terms[0].var.kind == VarKind::data)
            throw ParseError(pos, "control variable '" + v + "' must be assigned cur or a control variable");
          t.ctrl.push_back({ref->index, e.terms[0].var});
        } else {
          DataUpdate u{ref->index, add, e};
          if (!add && e.coeff(*ref) == 1) {
            u.accumulate = true;
            u.expr.add(*ref, -1);
          }
          t.data.push_back(u);
        }
      }
      s.transitions.push_back(std::move(t));
    }
    for (const auto& [q, coeffs, c, pos] : outs) {
      auto i = s.state_index(q);
      if (!i) i = s.add_state(q);
      Expr e = to_expr(s, coeffs, c, pos);
      if (e.mentions(VarKind::cur)) throw ParseError(pos, "output cannot read cur");
      s.output[*i] = e;
    }
    return s;
  }

 private:
  TokenStream ts_;

  void names(std::vector<std::string>& into) {
    while (!ts_.accept(";")) {
      into.push_back(ts_.expect_ident().text);
      ts_.accept(",");
    }
  }

  static VarRef guard_var(const Snt& s, const std::string& n, Position pos) {
    auto r = s.var(n);
    if (!r || r->kind == VarKind::data) throw ParseError(pos, "guard operand '" + n + "' is not cur or a control variable");
    return *r;
  }

  static Expr to_expr(const Snt& s, const std::map<std::string, Value>& coeffs, Value c, Position pos) {
    Expr e = Expr::of_const(c);
    for (const auto& [n, k] : coeffs) {
      auto r = s.var(n);
      if (!r) throw ParseError(pos, "unknown variable '" + n + "'");
      e.add(*r, k);
    }
    return e;
  }

  using Lin = std::pair<std::map<std::string, Value>, Value>;

  static void add_into(Lin& a, const Lin& b, Value k) {
    for (const auto& [n, c] : b.first) {
      Value& slot = a.first[n];
      slot = checked_add(slot, checked_mul(c, k));
      if (slot == 0) a.first.erase(n);
    }
    a.second = checked_add(a.second, checked_mul(b.second, k));
  }

  Lin linear() {
    Lin acc;
    Value sign = 1;
    if (ts_.accept("-")) sign = -1;
    add_into(acc, product(), sign);
    while (ts_.is("+") || ts_.is("-")) {
      sign = ts_.next().text == "+" ? 1 : -1;
      add_into(acc, product(), sign);
    }
    return acc;
  }

  Lin product() {
    Lin acc = factor();
    while (ts_.accept("*")) {
      Position pos = ts_.peek().pos;
      Lin rhs = factor();
      if (!acc.first.empty() && !rhs.first.empty()) throw ParseError(pos, "nonlinear product");
      if (!acc.first.empty()) std::swap(acc, rhs);
      Lin out;
      add_into(out, rhs, acc.second);
      acc = out;
    }
    return acc;
  }

  Lin factor() {
    if (ts_.accept("(")) {
      Lin e = linear();
      ts_.expect(")");
      return e;
    }
    if (ts_.accept("-")) {
      Lin out;
      add_into(out, factor(), -1);
      return out;
    }
    if (ts_.peek().kind == Tok::number) return {{}, ts_.expect_number()};
    std::string n = ts_.expect_ident().text;
    return {{{n, 1}}, 0};
  }
};

inline std::string expr_text(const Snt& s, const Expr& e) {
  std::string out;
  for (const auto& t : e.terms) {
    Value c = t.coeff;
    if (out.empty()) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    Value m = c < 0 ? -c : c;
    if (m != 1) out += std::to_string(m) + "*";
    out += s.var_name(t.var);
  }
  if (e.constant != 0 || out.empty()) {
    if (out.empty())
      out = std::to_string(e.constant);
    else
      out += (e.constant < 0 ? " - " : " + ") + std::to_string(e.constant < 0 ? -e.constant : e.constant);
  }
  return out;
}

}  // namespace detail

inline Snt parse_snt(std::string_view text) { return detail::SntParser(text).parse(); }

inline std::string expr_text(const Snt& s, const Expr& e) { return detail::expr_text(s, e); }

inline std::string to_text(const Snt& s) {
  std::ostringstream os;
  os << "snt " << s.name << " {\n";
  auto list = [&](const char* kw, const std::vector<std::string>& v) {
    if (v.empty()) return;
    os << "  " << kw;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : " ") << v[i];
    os << ";\n";
  };
  list("control", s.control);
  list("data", s.data);
  os << "  init " << s.states[s.initial] << ";\n";
  for (const auto& t : s.transitions) {
    os << "  " << s.states[t.src] << " -> " << s.states[t.dst] << " [";
    std::string g = detail::guard_text(s, t.guard);
    if (t.end)
      os << (g.empty() ? "end" : "end & " + g);
    else
      os << (g.empty() ? "true" : g);
    os << "] {";
    for (const auto& u : t.ctrl) os << " " << s.control[u.var] << " := " << s.var_name(u.source) << ";";
    for (const auto& u : t.data)
      os << " " << s.data[u.var] << (u.accumulate ? " += " : " := ") << detail::expr_text(s, u.expr) << ";";
    os << (t.ctrl.empty() && t.data.empty() ? "}\n" : " }\n");
  }
  for (std::size_t q = 0; q < s.states.size(); ++q)
    if (s.output[q]) os << "  output " << s.states[q] << " = " << detail::expr_text(s, *s.output[q]) << ";\n";
  for (const auto& [a, b] : s.links) os << "  link " << a << " " << b << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace redcheck
