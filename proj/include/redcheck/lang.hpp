#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "redcheck/core.hpp"
#include "redcheck/lexer.hpp"

namespace redcheck {

class NestingError : public ParseError {
 public:
  using ParseError::ParseError;
};

class InitError : public ParseError {
 public:
  using ParseError::ParseError;
};

struct AstExpr;
using AstExprPtr = std::shared_ptr<const AstExpr>;

struct AstExpr {
  enum class Kind { num, var, cur, add, sub, neg, mul, div, call };
  Kind kind = Kind::num;
  Value num = 0;
  std::string name;  // var or call name
  std::vector<AstExprPtr> args;
  Position pos;
};

inline AstExprPtr make_num(Value v, Position p = {}) {
  auto e = std::make_shared<AstExpr>();
  e->kind = AstExpr::Kind::num;
  e->num = v;
  e->pos = p;
  return e;
}

inline AstExprPtr make_var(std::string name, Position p = {}) {
  auto e = std::make_shared<AstExpr>();
  if (name == "cur") {
    e->kind = AstExpr::Kind::cur;
  } else {
    e->kind = AstExpr::Kind::var;
    e->name = std::move(name);
  }
  e->pos = p;
  return e;
}

inline AstExprPtr make_op(AstExpr::Kind k, std::vector<AstExprPtr> args, Position p = {},
                          std::string name = {}) {
  auto e = std::make_shared<AstExpr>();
  e->kind = k;
  e->args = std::move(args);
  e->name = std::move(name);
  e->pos = p;
  return e;
}

// Linear view of an expression: constant + sum coeff*name ("cur" included).
struct LinearForm {
  Value constant = 0;
  std::map<std::string, Value> coeffs;

  void add(const std::string& v, Value c) {
    if (c == 0) return;
    Value& slot = coeffs[v];
    slot = checked_add(slot, c);
    if (slot == 0) coeffs.erase(v);
  }
  bool is_constant() const { return coeffs.empty(); }
};

inline std::optional<LinearForm> linearize(const AstExpr& e) {
  using K = AstExpr::Kind;
  switch (e.kind) {
    case K::num: return LinearForm{e.num, {}};
    case K::cur:
    case K::var: {
      LinearForm f;
      f.add(e.kind == K::cur ? "cur" : e.name, 1);
      return f;
    }
    case K::add:
    case K::sub: {
      auto a = linearize(*e.args[0]);
      auto b = linearize(*e.args[1]);
      if (!a || !b) return std::nullopt;
      Value s = e.kind == K::add ? 1 : -1;
      a->constant = checked_add(a->constant, checked_mul(s, b->constant));
      for (const auto& [v, c] : b->coeffs) a->add(v, checked_mul(s, c));
      return a;
    }
    case K::neg: {
      auto a = linearize(*e.args[0]);
      if (!a) return std::nullopt;
      LinearForm r;
      r.constant = checked_mul(a->constant, -1);
      for (const auto& [v, c] : a->coeffs) r.add(v, checked_mul(c, -1));
      return r;
    }
    case K::mul: {
      auto a = linearize(*e.args[0]);
      auto b = linearize(*e.args[1]);
      if (!a || !b) return std::nullopt;
      if (!a->is_constant() && !b->is_constant()) return std::nullopt;
      if (!a->is_constant()) std::swap(a, b);
      Value k = a->constant;
      LinearForm r;
      r.constant = checked_mul(b->constant, k);
      for (const auto& [v, c] : b->coeffs) r.add(v, checked_mul(c, k));
      return r;
    }
    default: return std::nullopt;
  }
}

inline void collect_names(const AstExpr& e, std::vector<std::string>& out) {
  if (e.kind == AstExpr::Kind::var) {
    if (std::find(out.begin(), out.end(), e.name) == out.end()) out.push_back(e.name);
  }
  for (const auto& a : e.args) collect_names(*a, out);
}

inline bool reads_cur(const AstExpr& e) {
  if (e.kind == AstExpr::Kind::cur) return true;
  for (const auto& a : e.args)
    if (reads_cur(*a)) return true;
  return false;
}

inline std::string expr_text(const AstExpr& e);

namespace detail {
inline int precedence(AstExpr::Kind k) {
  using K = AstExpr::Kind;
  switch (k) {
    case K::add:
    case K::sub: return 1;
    case K::mul:
    case K::div: return 2;
    case K::neg: return 3;
    default: return 4;
  }
}
inline std::string wrap(const AstExpr& e, int min_prec) {
  std::string s = expr_text(e);
  return precedence(e.kind) < min_prec ? "(" + s + ")" : s;
}
}  // namespace detail

inline std::string expr_text(const AstExpr& e) {
  using K = AstExpr::Kind;
  switch (e.kind) {
    case K::num: return std::to_string(e.num);
    case K::cur: return "cur";
    case K::var: return e.name;
    case K::add: return detail::wrap(*e.args[0], 1) + " + " + detail::wrap(*e.args[1], 2);
    case K::sub: return detail::wrap(*e.args[0], 1) + " - " + detail::wrap(*e.args[1], 2);
    case K::mul: return detail::wrap(*e.args[0], 2) + " * " + detail::wrap(*e.args[1], 3);
    case K::div: return detail::wrap(*e.args[0], 2) + " / " + detail::wrap(*e.args[1], 3);
    case K::neg: return "-" + detail::wrap(*e.args[0], 3);
    case K::call: {
      std::string s = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += expr_text(*e.args[i]);
      }
      return s + ")";
    }
  }
  return {};
}

struct NamedAtom {
  std::string lhs;  // "cur" or a control variable
  Rel rel = Rel::eq;
  std::string rhs;
  Position pos;
};

inline NamedAtom negate_to(const NamedAtom& a, Rel r) { return NamedAtom{a.lhs, r, a.rhs, a.pos}; }

struct Stmt {
  enum class Kind { data_assign, data_add, ctrl_assign, if_else, next, assume };
  Kind kind = Kind::next;
  std::string target;
  AstExprPtr expr;     // data_assign, data_add
  std::string source;  // ctrl_assign: "cur" or a control variable
  std::vector<NamedAtom> guard;  // if_else, assume
  std::vector<Stmt> then_branch;
  std::vector<Stmt> else_branch;
  Position pos;
};

struct Phase {
  std::vector<std::vector<Stmt>> prefix;  // each segment is terminated by `next;`
  std::vector<Stmt> loop_body;            // the body preceding the loop's `next;`
};

// Assignment executed once between the first loop and `init;`.
struct BridgeAssign {
  std::string target;
  AstExprPtr expr;
  Position pos;
};

struct ReturnExpr {
  enum class Kind { linear, uninterpreted };
  Kind kind = Kind::linear;
  std::string function;          // uninterpreted only
  std::vector<AstExprPtr> args;  // linear: exactly one
  AstExprPtr source;
};

struct ReducerProgram {
  std::string name;
  std::vector<std::string> control_vars;
  std::vector<std::string> data_vars;
  Phase first;
  std::vector<BridgeAssign> bridge;
  std::optional<Phase> second;  // present iff the program has `init;`
  std::vector<std::string> second_control;
  std::vector<std::string> second_data;
  ReturnExpr ret;

  bool has_init() const { return second.has_value(); }
  bool is_control(const std::string& v) const {
    return std::find(control_vars.begin(), control_vars.end(), v) != control_vars.end();
  }
  bool is_data(const std::string& v) const {
    return std::find(data_vars.begin(), data_vars.end(), v) != data_vars.end();
  }
};

// All variable names, control first then data, then phase-2-only names.
inline std::vector<std::string> all_variables(const ReducerProgram& p) {
  std::vector<std::string> out;
  auto push = [&](const std::string& v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  for (const auto& v : p.control_vars) push(v);
  for (const auto& v : p.data_vars) push(v);
  for (const auto& v : p.second_control) push(v);
  for (const auto& v : p.second_data) push(v);
  return out;
}

// ---------------------------------------------------------------- sorts

namespace detail {

struct SortFacts {
  std::vector<std::string> order;
  std::map<std::string, std::string> needs_control;  // name -> reason
  std::map<std::string, std::string> needs_data;
  std::map<std::string, Position> where;

  void see(const std::string& v, Position p) {
    if (v == "cur") return;
    if (std::find(order.begin(), order.end(), v) == order.end()) {
      order.push_back(v);
      where[v] = p;
    }
  }
  void control(const std::string& v, Position p, std::string why) {
    if (v == "cur") return;
    see(v, p);
    needs_control.emplace(v, std::move(why));
  }
  void data(const std::string& v, Position p, std::string why) {
    see(v, p);
    needs_data.emplace(v, std::move(why));
  }
};

inline bool bare_operand(const AstExpr& e) {
  return e.kind == AstExpr::Kind::var || e.kind == AstExpr::Kind::cur;
}

inline void gather(const std::vector<Stmt>& ss, SortFacts& f) {
  for (const auto& s : ss) {
    switch (s.kind) {
      case Stmt::Kind::if_else:
      case Stmt::Kind::assume:
        for (const auto& a : s.guard) {
          f.control(a.lhs, a.pos, "used in a guard");
          f.control(a.rhs, a.pos, "used in a guard");
        }
        gather(s.then_branch, f);
        gather(s.else_branch, f);
        break;
      case Stmt::Kind::data_assign:
      case Stmt::Kind::data_add:
      case Stmt::Kind::ctrl_assign: {
        if (s.kind == Stmt::Kind::ctrl_assign) {
          f.see(s.target, s.pos);
          f.control(s.target, s.pos, "assigned from cur or a control variable");
          f.control(s.source, s.pos, "read in an assignment");
          break;
        }
        f.see(s.target, s.pos);
        std::vector<std::string> names;
        collect_names(*s.expr, names);
        for (const auto& n : names) f.control(n, s.pos, "read in an assignment");
        if (s.kind == Stmt::Kind::data_add)
          f.data(s.target, s.pos, "accumulated with +=");
        else if (!bare_operand(*s.expr))
          f.data(s.target, s.pos, "assigned an arithmetic expression");
        break;
      }
      case Stmt::Kind::next: break;
    }
  }
}

inline void resolve(std::vector<Stmt>& ss, const std::set<std::string>& control) {
  for (auto& s : ss) {
    if (s.kind == Stmt::Kind::data_assign && control.count(s.target)) {
      s.kind = Stmt::Kind::ctrl_assign;
      s.source = s.expr->kind == AstExpr::Kind::cur ? "cur" : s.expr->name;
      s.expr.reset();
    }
    resolve(s.then_branch, control);
    resolve(s.else_branch, control);
  }
}

// Splits the observed names into (control, data); declarations take precedence
// but must agree with usage.
inline std::pair<std::vector<std::string>, std::vector<std::string>> decide_sorts(
    const SortFacts& f, const std::map<std::string, bool>& declared) {
  std::vector<std::string> ctrl, data;
  for (const auto& v : f.order) {
    Position p = f.where.at(v);
    auto c = f.needs_control.find(v);
    auto d = f.needs_data.find(v);
    auto decl = declared.find(v);
    bool is_ctrl;
    if (decl != declared.end()) {
      is_ctrl = decl->second;
      if (is_ctrl && d != f.needs_data.end())
        throw SortError(p, "control variable '" + v + "' " + d->second);
      if (!is_ctrl && c != f.needs_control.end())
        throw SortError(p, "data variable '" + v + "' " + c->second);
    } else if (c != f.needs_control.end() && d != f.needs_data.end()) {
      if (c->second == "used in a guard")
        throw SortError(p, "data variable '" + v + "' used in a guard");
      throw SortError(p, "control variable '" + v + "' " + d->second);
    } else {
      is_ctrl = c != f.needs_control.end();
    }
    (is_ctrl ? ctrl : data).push_back(v);
  }
  return {ctrl, data};
}

}  // namespace detail

// ---------------------------------------------------------------- parser

namespace detail {

class ProgramParser {
 public:
  explicit ProgramParser(std::string_view text) : ts_(tokenize(text)) {}

  ReducerProgram parse() {
    ReducerProgram p;
    bool wrapped = false;
    if (ts_.accept("reducer")) {
      p.name = ts_.expect_ident().text;
      ts_.expect("{");
      wrapped = true;
    } else {
      p.name = "main";
    }
    parse_decls();
    parse_body(p, wrapped);
    if (wrapped) ts_.expect("}");
    if (!ts_.at_end()) throw ParseError(ts_.peek().pos, "unexpected '" + ts_.peek().text + "' after program");
    assign_sorts(p);
    return p;
  }

 private:
  TokenStream ts_;
  std::map<std::string, bool> declared_;

  static bool reserved(const std::string& s) {
    static const std::set<std::string> kw = {"reducer", "control", "data", "loop", "next", "init",
                                             "ret",     "if",      "else", "cur",  "true"};
    return kw.count(s) > 0;
  }

  std::string variable_name() {
    const Token& t = ts_.expect_ident();
    if (reserved(t.text)) throw ParseError(t.pos, "'" + t.text + "' is a keyword");
    return t.text;
  }

  void parse_decls() {
    while (ts_.is("control") || ts_.is("data")) {
      bool ctrl = ts_.next().text == "control";
      do {
        Position pos = ts_.peek().pos;
        std::string v = variable_name();
        auto [it, fresh] = declared_.emplace(v, ctrl);
        if (!fresh && it->second != ctrl) throw SortError(pos, "variable '" + v + "' declared with both sorts");
      } while (ts_.accept(",") || (ts_.peek().kind == Tok::ident && !ts_.is(";")));
      ts_.expect(";");
    }
  }

  void parse_phase_prefix(Phase& ph, bool& saw_loop) {
    std::vector<Stmt> seg;
    while (true) {
      if (ts_.is("next")) {
        ts_.next();
        ts_.expect(";");
        ph.prefix.push_back(std::move(seg));
        seg.clear();
        continue;
      }
      if (ts_.is("loop")) {
        Position pos = ts_.next().pos;
        if (!seg.empty())
          throw ParseError(pos, "statements before 'loop' must be terminated by 'next;'");
        ts_.expect("{");
        ph.loop_body = parse_loop_body();
        saw_loop = true;
        return;
      }
      if (ts_.is("ret") || ts_.is("init") || ts_.is("}") || ts_.at_end()) {
        throw ParseError(ts_.peek().pos, "expected 'loop' before '" +
                                             (ts_.at_end() ? std::string("end of input") : ts_.peek().text) + "'");
      }
      seg.push_back(parse_stmt());
    }
  }

  std::vector<Stmt> parse_loop_body() {
    std::vector<Stmt> body;
    while (true) {
      if (ts_.is("loop")) throw NestingError(ts_.peek().pos, "nested loop: a loop body cannot contain 'loop'");
      if (ts_.is("next")) {
        Position pos = ts_.next().pos;
        ts_.expect(";");
        if (!ts_.is("}")) throw ParseError(pos, "'next;' must be the last statement of a loop body");
        ts_.next();
        return body;
      }
      if (ts_.is("init")) throw InitError(ts_.peek().pos, "'init' cannot appear inside a loop");
      if (ts_.is("}")) throw ParseError(ts_.peek().pos, "loop body must end with 'next;'");
      if (ts_.is("ret")) throw ParseError(ts_.peek().pos, "'ret' cannot appear inside a loop");
      body.push_back(parse_stmt());
    }
  }

  void parse_body(ReducerProgram& p, bool wrapped) {
    bool saw_loop = false;
    parse_phase_prefix(p.first, saw_loop);
    if (!ts_.is("ret")) {
      // bridge assignments, then init
      while (!ts_.is("init")) {
        if (ts_.is("ret")) break;
        if (ts_.at_end() || (wrapped && ts_.is("}")))
          throw ParseError(ts_.peek().pos, "expected 'ret' after the loop");
        if (ts_.is("loop")) throw ParseError(ts_.peek().pos, "a second loop requires 'init;' before it");
        if (ts_.is("next")) throw ParseError(ts_.peek().pos, "'next' after the loop must be preceded by 'init;'");
        Position pos = ts_.peek().pos;
        std::string target = variable_name();
        ts_.expect(":=");
        AstExprPtr e = parse_expr();
        ts_.expect(";");
        if (reads_cur(*e)) throw ParseError(pos, "cur is undefined after a loop");
        p.bridge.push_back({target, e, pos});
      }
      if (ts_.is("init")) {
        ts_.next();
        ts_.expect(";");
        Phase second;
        bool loop2 = false;
        if (ts_.is("init")) throw InitError(ts_.peek().pos, "multiple 'init' markers");
        parse_phase_prefix_checked(second, loop2);
        p.second = std::move(second);
      } else if (!p.bridge.empty()) {
        throw ParseError(p.bridge.front().pos, "assignments after the loop are only allowed before 'init;'");
      }
    }
    const Token& r = ts_.expect("ret");
    AstExprPtr e = parse_expr();
    ts_.expect(";");
    if (reads_cur(*e)) throw ParseError(r.pos, "'ret' cannot read cur");
    p.ret = make_return(e);
    if (ts_.is("init")) throw InitError(ts_.peek().pos, "multiple 'init' markers");
  }

  void parse_phase_prefix_checked(Phase& ph, bool& saw) {
    // a second init anywhere in phase 2 is reported as such
    std::vector<Stmt> seg;
    while (true) {
      if (ts_.is("init")) throw InitError(ts_.peek().pos, "multiple 'init' markers");
      if (ts_.is("next")) {
        ts_.next();
        ts_.expect(";");
        ph.prefix.push_back(std::move(seg));
        seg.clear();
        continue;
      }
      if (ts_.is("loop")) {
        Position pos = ts_.next().pos;
        if (!seg.empty()) throw ParseError(pos, "statements before 'loop' must be terminated by 'next;'");
        ts_.expect("{");
        ph.loop_body = parse_loop_body();
        saw = true;
        if (ts_.is("init")) throw InitError(ts_.peek().pos, "multiple 'init' markers");
        return;
      }
      if (ts_.is("ret") || ts_.is("}") || ts_.at_end())
        throw ParseError(ts_.peek().pos, "expected 'loop' after 'init;'");
      seg.push_back(parse_stmt());
    }
  }

  static ReturnExpr make_return(const AstExprPtr& e) {
    ReturnExpr r;
    r.source = e;
    if (linearize(*e)) {
      r.kind = ReturnExpr::Kind::linear;
      r.args = {e};
      return r;
    }
    r.kind = ReturnExpr::Kind::uninterpreted;
    switch (e->kind) {
      case AstExpr::Kind::call: r.function = e->name; break;
      case AstExpr::Kind::div: r.function = "div"; break;
      case AstExpr::Kind::mul: r.function = "mul"; break;
      default: r.function = "op"; break;
    }
    flatten_leaves(e, r.args);
    return r;
  }

  static void flatten_leaves(const AstExprPtr& e, std::vector<AstExprPtr>& out) {
    if (linearize(*e)) {
      out.push_back(e);
      return;
    }
    for (const auto& a : e->args) flatten_leaves(a, out);
  }

  Stmt parse_stmt() {
    Position pos = ts_.peek().pos;
    if (ts_.accept("if")) {
      Stmt s;
      s.kind = Stmt::Kind::if_else;
      s.pos = pos;
      ts_.expect("(");
      s.guard = parse_guard();
      ts_.expect(")");
      s.then_branch = parse_block();
      if (ts_.accept("else")) s.else_branch = parse_block();
      return s;
    }
    if (ts_.is("next")) throw ParseError(pos, "'next' is only allowed at the top level of a segment or loop");
    if (ts_.is("loop")) throw NestingError(pos, "nested loop: 'loop' inside a statement");
    if (ts_.is("init")) throw InitError(pos, "'init' cannot appear inside a statement");
    Stmt s;
    s.pos = pos;
    s.target = variable_name();
    if (ts_.accept(":=")) {
      s.kind = Stmt::Kind::data_assign;
    } else if (ts_.accept("+=")) {
      s.kind = Stmt::Kind::data_add;
    } else {
      ts_.fail({":=", "+="});
    }
    s.expr = parse_expr();
    ts_.expect(";");
    return s;
  }

  std::vector<Stmt> parse_block() {
    ts_.expect("{");
    std::vector<Stmt> out;
    while (!ts_.is("}")) {
      if (ts_.at_end()) ts_.fail({"}"});
      out.push_back(parse_stmt());
    }
    ts_.next();
    return out;
  }

  std::vector<NamedAtom> parse_guard() {
    std::vector<NamedAtom> g;
    do {
      NamedAtom a;
      a.pos = ts_.peek().pos;
      a.lhs = operand();
      if (ts_.accept("<"))
        a.rel = Rel::lt;
      else if (ts_.accept(">"))
        a.rel = Rel::gt;
      else if (ts_.accept("==") || ts_.accept("="))
        a.rel = Rel::eq;
      else
        ts_.fail({"<", ">", "=="});
      a.rhs = operand();
      g.push_back(a);
    } while (ts_.accept("&&") || ts_.accept("&"));
    return g;
  }

  std::string operand() {
    const Token& t = ts_.peek();
    if (t.kind != Tok::ident) {
      if (t.kind == Tok::number) throw ParseError(t.pos, "guards compare variables only");
      ts_.fail({"cur", "identifier"});
    }
    if (t.text == "cur") {
      ts_.next();
      return "cur";
    }
    return variable_name();
  }

  AstExprPtr parse_expr() {
    AstExprPtr lhs = parse_term();
    while (ts_.is("+") || ts_.is("-")) {
      const Token& op = ts_.next();
      AstExprPtr rhs = parse_term();
      lhs = make_op(op.text == "+" ? AstExpr::Kind::add : AstExpr::Kind::sub, {lhs, rhs}, op.pos);
    }
    return lhs;
  }

  AstExprPtr parse_term() {
    AstExprPtr lhs = parse_unary();
    while (ts_.is("*") || ts_.is("/")) {
      const Token& op = ts_.next();
      AstExprPtr rhs = parse_unary();
      lhs = make_op(op.text == "*" ? AstExpr::Kind::mul : AstExpr::Kind::div, {lhs, rhs}, op.pos);
    }
    return lhs;
  }

  AstExprPtr parse_unary() {
    if (ts_.is("-")) {
      Position pos = ts_.next().pos;
      return make_op(AstExpr::Kind::neg, {parse_unary()}, pos);
    }
    return parse_primary();
  }

  AstExprPtr parse_primary() {
    const Token& t = ts_.peek();
    if (t.kind == Tok::number) {
      Position pos = t.pos;
      return make_num(ts_.expect_number(), pos);
    }
    if (ts_.accept("(")) {
      AstExprPtr e = parse_expr();
      ts_.expect(")");
      return e;
    }
    if (t.kind == Tok::ident) {
      Position pos = t.pos;
      if (t.text == "cur") {
        ts_.next();
        return make_var("cur", pos);
      }
      std::string name = variable_name();
      if (ts_.accept("(")) {
        std::vector<AstExprPtr> args;
        if (!ts_.is(")")) {
          do {
            args.push_back(parse_expr());
          } while (ts_.accept(","));
        }
        ts_.expect(")");
        if (args.empty()) throw ParseError(pos, "function '" + name + "' needs at least one argument");
        return make_op(AstExpr::Kind::call, std::move(args), pos, name);
      }
      return make_var(name, pos);
    }
    ts_.fail({"expression"});
  }

  static void no_calls(const std::vector<Stmt>& ss) {
    for (const auto& s : ss) {
      if (s.expr) {
        std::vector<const AstExpr*> stack{s.expr.get()};
        while (!stack.empty()) {
          const AstExpr* e = stack.back();
          stack.pop_back();
          if (e->kind == AstExpr::Kind::call)
            throw ParseError(e->pos, "function calls are only allowed in 'ret'");
          for (const auto& a : e->args) stack.push_back(a.get());
        }
      }
      no_calls(s.then_branch);
      no_calls(s.else_branch);
    }
  }

  void assign_sorts(ReducerProgram& p) {
    auto phase_stmts = [](const Phase& ph, SortFacts& f) {
      for (const auto& seg : ph.prefix) gather(seg, f);
      gather(ph.loop_body, f);
    };
    auto check_phase = [](const Phase& ph) {
      for (const auto& seg : ph.prefix) no_calls(seg);
      no_calls(ph.loop_body);
    };
    check_phase(p.first);
    if (p.second) check_phase(*p.second);

    SortFacts f1;
    phase_stmts(p.first, f1);
    for (const auto& b : p.bridge) {
      f1.see(b.target, b.pos);
      if (!bare_operand(*b.expr) || b.expr->kind == AstExpr::Kind::var)
        f1.data(b.target, b.pos, "assigned an arithmetic expression");
      std::vector<std::string> names;
      collect_names(*b.expr, names);
      for (const auto& n : names) f1.see(n, b.pos);
    }
    if (!p.second) {
      std::vector<std::string> names;
      collect_names(*p.ret.source, names);
      for (const auto& n : names) f1.see(n, p.ret.source->pos);
    }
    std::tie(p.control_vars, p.data_vars) = decide_sorts(f1, declared_);
    std::set<std::string> c1(p.control_vars.begin(), p.control_vars.end());
    for (auto& seg : p.first.prefix) resolve(seg, c1);
    resolve(p.first.loop_body, c1);

    if (p.second) {
      SortFacts f2;
      phase_stmts(*p.second, f2);
      std::vector<std::string> names;
      collect_names(*p.ret.source, names);
      for (const auto& n : names) f2.see(n, p.ret.source->pos);
      std::tie(p.second_control, p.second_data) = decide_sorts(f2, {});
      std::set<std::string> c2(p.second_control.begin(), p.second_control.end());
      for (auto& seg : p.second->prefix) resolve(seg, c2);
      resolve(p.second->loop_body, c2);
    }
    for (const auto& [v, ctrl] : declared_) {
      bool seen = std::find(p.control_vars.begin(), p.control_vars.end(), v) != p.control_vars.end() ||
                  std::find(p.data_vars.begin(), p.data_vars.end(), v) != p.data_vars.end();
      if (!seen) (ctrl ? p.control_vars : p.data_vars).push_back(v);
    }
  }
};

}  // namespace detail

inline ReducerProgram parse_program(std::string_view text) {
  return detail::ProgramParser(text).parse();
}

// ---------------------------------------------------------------- printing

namespace detail {
inline void print_stmts(std::ostream& os, const std::vector<Stmt>& ss, int indent);

inline std::string guard_text(const std::vector<NamedAtom>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) s += " && ";
    s += g[i].lhs + " " + (g[i].rel == Rel::eq ? "==" : rel_text(g[i].rel)) + " " + g[i].rhs;
  }
  return s;
}

inline void print_stmts(std::ostream& os, const std::vector<Stmt>& ss, int indent) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& s : ss) {
    switch (s.kind) {
      case Stmt::Kind::data_assign: os << pad << s.target << " := " << expr_text(*s.expr) << ";\n"; break;
      case Stmt::Kind::data_add: os << pad << s.target << " += " << expr_text(*s.expr) << ";\n"; break;
      case Stmt::Kind::ctrl_assign: os << pad << s.target << " := " << s.source << ";\n"; break;
      case Stmt::Kind::next: os << pad << "next;\n"; break;
      case Stmt::Kind::assume: os << pad << "assume(" << guard_text(s.guard) << ");\n"; break;
      case Stmt::Kind::if_else:
        os << pad << "if (" << guard_text(s.guard) << ") {\n";
        print_stmts(os, s.then_branch, indent + 2);
        os << pad << "}";
        if (!s.else_branch.empty()) {
          os << " else {\n";
          print_stmts(os, s.else_branch, indent + 2);
          os << pad << "}";
        }
        os << "\n";
        break;
    }
  }
}

inline void print_phase(std::ostream& os, const Phase& ph) {
  for (const auto& seg : ph.prefix) {
    print_stmts(os, seg, 2);
    os << "  next;\n";
  }
  os << "  loop {\n";
  print_stmts(os, ph.loop_body, 4);
  os << "    next;\n  }\n";
}
}  // namespace detail

inline std::string to_source(const ReducerProgram& p) {
  std::ostringstream os;
  os << "reducer " << p.name << " {\n";
  if (!p.control_vars.empty()) {
    os << "  control";
    for (std::size_t i = 0; i < p.control_vars.size(); ++i) os << (i ? ", " : " ") << p.control_vars[i];
    os << ";\n";
  }
  if (!p.data_vars.empty()) {
    os << "  data";
    for (std::size_t i = 0; i < p.data_vars.size(); ++i) os << (i ? ", " : " ") << p.data_vars[i];
    os << ";\n";
  }
  detail::print_phase(os, p.first);
  for (const auto& b : p.bridge) os << "  " << b.target << " := " << expr_text(*b.expr) << ";\n";
  if (p.second) {
    os << "  init;\n";
    detail::print_phase(os, *p.second);
  }
  os << "  ret " << expr_text(*p.ret.source) << ";\n}\n";
  return os.str();
}

// ---------------------------------------------------------------- interpreter

// Output of a program run: one value for a linear return, the argument tuple
// for an uninterpreted one; nullopt is the undefined result.
using Outcome = std::optional<std::vector<Value>>;

using Valuation = std::map<std::string, Value>;

namespace detail {

struct Bottom {};

class Machine {
 public:
  Machine(const std::vector<Value>& w, const Valuation& rho0) : w_(w), env_(rho0) {}

  Outcome run(const ReducerProgram& p) {
    try {
      if (w_.empty()) return std::nullopt;
      reset();
      run_phase(p.first);
      for (const auto& b : p.bridge) env_[b.target] = eval(*b.expr);
      if (p.second) {
        reset();
        run_phase(*p.second);
      }
      std::vector<Value> out;
      for (const auto& a : p.ret.args) out.push_back(eval(*a));
      return out;
    } catch (const Bottom&) {
      return std::nullopt;
    }
  }

  void exec(const std::vector<Stmt>& ss) {
    for (const auto& s : ss) exec(s);
  }

  // Straight-line execution used by path checks: false if an assume fails.
  bool exec_path(const std::vector<Stmt>& ss) {
    try {
      for (const auto& s : ss) {
        if (s.kind == Stmt::Kind::assume) {
          if (!holds(s.guard)) return false;
        } else {
          exec(s);
        }
      }
      return true;
    } catch (const Bottom&) {
      return false;
    }
  }

  void set_cur(std::optional<Value> c) { cur_ = c; }
  Value get(const std::string& v) const {
    auto it = env_.find(v);
    return it == env_.end() ? 0 : it->second;
  }
  const Valuation& env() const { return env_; }

 private:
  const std::vector<Value>& w_;
  Valuation env_;
  std::optional<Value> cur_;
  std::size_t pos_ = 0;

  void reset() {
    cur_ = w_.front();
    pos_ = 1;
  }

  void advance() {
    if (pos_ < w_.size())
      cur_ = w_[pos_++];
    else
      cur_.reset();
  }

  void run_phase(const Phase& ph) {
    for (const auto& seg : ph.prefix) {
      exec(seg);
      advance();
    }
    while (cur_) {
      exec(ph.loop_body);
      advance();
    }
  }

  Value read(const std::string& v) const {
    if (v == "cur") {
      if (!cur_) throw Bottom{};
      return *cur_;
    }
    return get(v);
  }

  bool holds(const std::vector<NamedAtom>& g) const {
    for (const auto& a : g)
      if (!rel_holds(a.rel, read(a.lhs), read(a.rhs))) return false;
    return true;
  }

  Value eval(const AstExpr& e) const {
    using K = AstExpr::Kind;
    switch (e.kind) {
      case K::num: return e.num;
      case K::cur: return read("cur");
      case K::var: return read(e.name);
      case K::add: return checked_add(eval(*e.args[0]), eval(*e.args[1]));
      case K::sub: return checked_sub(eval(*e.args[0]), eval(*e.args[1]));
      case K::neg: return checked_sub(0, eval(*e.args[0]));
      case K::mul: return checked_mul(eval(*e.args[0]), eval(*e.args[1]));
      case K::div: {
        Value a = eval(*e.args[0]);
        Value b = eval(*e.args[1]);
        if (b == 0 || (a == INT64_MIN && b == -1)) throw Bottom{};
        return a / b;
      }
      case K::call: throw Bottom{};
    }
    throw Bottom{};
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::data_assign: env_[s.target] = eval(*s.expr); break;
      case Stmt::Kind::data_add: env_[s.target] = checked_add(get(s.target), eval(*s.expr)); break;
      case Stmt::Kind::ctrl_assign: env_[s.target] = read(s.source); break;
      case Stmt::Kind::if_else:
        if (holds(s.guard))
          exec(s.then_branch);
        else
          exec(s.else_branch);
        break;
      case Stmt::Kind::assume:
        if (!holds(s.guard)) throw Bottom{};
        break;
      case Stmt::Kind::next: advance(); break;
    }
  }
};

}  // namespace detail

inline Outcome interpret(const ReducerProgram& p, const std::vector<Value>& w, const Valuation& rho0 = {}) {
  detail::Machine m(w, rho0);
  return m.run(p);
}

// ---------------------------------------------------------------- paths

inline std::vector<std::vector<Stmt>> enumerate_exec_paths(const std::vector<Stmt>& s) {
  std::vector<std::vector<Stmt>> paths{{}};
  for (const auto& st : s) {
    if (st.kind == Stmt::Kind::next) throw StructureError("enumerate_exec_paths: 'next' inside a segment");
    if (st.kind != Stmt::Kind::if_else) {
      for (auto& p : paths) p.push_back(st);
      continue;
    }
    // then: all atoms; else: first failing atom i, with earlier atoms holding
    std::vector<std::vector<Stmt>> branches;
    {
      Stmt a;
      a.kind = Stmt::Kind::assume;
      a.guard = st.guard;
      a.pos = st.pos;
      for (auto& tail : enumerate_exec_paths(st.then_branch)) {
        std::vector<Stmt> b{a};
        b.insert(b.end(), tail.begin(), tail.end());
        branches.push_back(std::move(b));
      }
    }
    auto else_tails = enumerate_exec_paths(st.else_branch);
    for (std::size_t i = 0; i < st.guard.size(); ++i) {
      const NamedAtom& atom = st.guard[i];
      Rel alts[2];
      switch (atom.rel) {
        case Rel::lt: alts[0] = Rel::eq, alts[1] = Rel::gt; break;
        case Rel::gt: alts[0] = Rel::eq, alts[1] = Rel::lt; break;
        default: alts[0] = Rel::lt, alts[1] = Rel::gt; break;
      }
      for (Rel r : alts) {
        Stmt a;
        a.kind = Stmt::Kind::assume;
        a.pos = st.pos;
        a.guard.assign(st.guard.begin(), st.guard.begin() + static_cast<std::ptrdiff_t>(i));
        a.guard.push_back(negate_to(atom, r));
        for (const auto& tail : else_tails) {
          std::vector<Stmt> b{a};
          b.insert(b.end(), tail.begin(), tail.end());
          branches.push_back(std::move(b));
        }
      }
    }
    std::vector<std::vector<Stmt>> next;
    for (const auto& p : paths) {
      for (const auto& b : branches) {
        auto q = p;
        q.insert(q.end(), b.begin(), b.end());
        next.push_back(std::move(q));
      }
    }
    paths = std::move(next);
  }
  return paths;
}

// Executes a straight-line path from the given environment with cur bound;
// returns the final environment or nullopt when an assume fails.
inline std::optional<Valuation> run_straight_line(const std::vector<Stmt>& path, const Valuation& env,
                                                  std::optional<Value> cur) {
  static const std::vector<Value> kNoWord;
  detail::Machine m(kNoWord, env);
  m.set_cur(cur);
  if (!m.exec_path(path)) return std::nullopt;
  return m.env();
}

// Whether a statement list reads cur anywhere (guards or expressions).
inline bool stmts_read_cur(const std::vector<Stmt>& ss) {
  for (const auto& s : ss) {
    for (const auto& a : s.guard)
      if (a.lhs == "cur" || a.rhs == "cur") return true;
    if (s.expr && reads_cur(*s.expr)) return true;
    if (s.kind == Stmt::Kind::ctrl_assign && s.source == "cur") return true;
    if (stmts_read_cur(s.then_branch) || stmts_read_cur(s.else_branch)) return true;
  }
  return false;
}

// Whether every statement stays inside the linear fragment.
inline bool stmts_linear(const std::vector<Stmt>& ss) {
  for (const auto& s : ss) {
    if (s.expr && !linearize(*s.expr)) return false;
    if (!stmts_linear(s.then_branch) || !stmts_linear(s.else_branch)) return false;
  }
  return true;
}

}  // namespace redcheck
