#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace redcheck {

using Value = std::int64_t;

struct Position {
  std::size_t line = 0;
  std::size_t column = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(Position pos, const std::string& msg)
      : Error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg),
        pos_(pos) {}
  Position position() const { return pos_; }

 private:
  Position pos_;
};

class SortError : public ParseError {
 public:
  using ParseError::ParseError;
};

// The input is well formed but outside the fragment the decision procedure covers.
class UnsupportedError : public Error {
 public:
  UnsupportedError(std::string constraint, const std::string& msg)
      : Error(msg), constraint_(std::move(constraint)) {}
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  OverflowError() : Error("64-bit overflow during concrete evaluation") {}
};

inline Value checked_add(Value a, Value b) {
  Value r;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError();
  return r;
}

inline Value checked_sub(Value a, Value b) {
  Value r;
  if (__builtin_sub_overflow(a, b, &r)) throw OverflowError();
  return r;
}

inline Value checked_mul(Value a, Value b) {
  Value r;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError();
  return r;
}

// Variable reference inside SNT expressions and guards.
enum class VarKind : std::uint8_t { cur, control, data };

struct VarRef {
  VarKind kind = VarKind::cur;
  std::size_t index = 0;

  static VarRef cur() { return {VarKind::cur, 0}; }
  static VarRef ctrl(std::size_t i) { return {VarKind::control, i}; }
  static VarRef data(std::size_t i) { return {VarKind::data, i}; }
  bool is_cur() const { return kind == VarKind::cur; }

  friend bool operator==(const VarRef& a, const VarRef& b) {
    return a.kind == b.kind && (a.kind == VarKind::cur || a.index == b.index);
  }
  friend bool operator<(const VarRef& a, const VarRef& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.kind == VarKind::cur) return false;
    return a.index < b.index;
  }
};

enum class Rel : std::uint8_t { eq, lt, gt };

inline Rel flip(Rel r) {
  switch (r) {
    case Rel::lt: return Rel::gt;
    case Rel::gt: return Rel::lt;
    default: return Rel::eq;
  }
}

inline const char* rel_text(Rel r) {
  switch (r) {
    case Rel::lt: return "<";
    case Rel::gt: return ">";
    default: return "=";
  }
}

inline bool rel_holds(Rel r, Value a, Value b) {
  switch (r) {
    case Rel::lt: return a < b;
    case Rel::gt: return a > b;
    default: return a == b;
  }
}

// lhs rel rhs, both sides cur or a control variable.
struct GuardAtom {
  VarRef lhs;
  Rel rel = Rel::eq;
  VarRef rhs;

  friend bool operator==(const GuardAtom& a, const GuardAtom& b) {
    return a.lhs == b.lhs && a.rel == b.rel && a.rhs == b.rhs;
  }
};

using Guard = std::vector<GuardAtom>;

struct Term {
  VarRef var;
  Value coeff = 0;
};

// c + sum coeff*var, terms sorted by variable, no zero coefficients.
struct Expr {
  Value constant = 0;
  std::vector<Term> terms;

  static Expr of_const(Value c) { return Expr{c, {}}; }
  static Expr of_var(VarRef v, Value c = 1) {
    Expr e;
    e.add(v, c);
    return e;
  }

  bool is_zero() const { return constant == 0 && terms.empty(); }

  Value coeff(VarRef v) const {
    for (const auto& t : terms)
      if (t.var == v) return t.coeff;
    return 0;
  }

  bool mentions(VarKind k) const {
    for (const auto& t : terms)
      if (t.var.kind == k) return true;
    return false;
  }

  void add(VarRef v, Value c) {
    if (c == 0) return;
    for (auto it = terms.begin(); it != terms.end(); ++it) {
      if (it->var == v) {
        it->coeff = checked_add(it->coeff, c);
        if (it->coeff == 0) terms.erase(it);
        return;
      }
      if (v < it->var) {
        terms.insert(it, Term{v, c});
        return;
      }
    }
    terms.push_back(Term{v, c});
  }

  Expr& operator+=(const Expr& o) {
    constant = checked_add(constant, o.constant);
    for (const auto& t : o.terms) add(t.var, t.coeff);
    return *this;
  }

  Expr scaled(Value k) const {
    Expr r;
    if (k == 0) return r;
    r.constant = checked_mul(constant, k);
    for (const auto& t : terms) r.terms.push_back(Term{t.var, checked_mul(t.coeff, k)});
    return r;
  }

  friend Expr operator+(Expr a, const Expr& b) { return a += b; }
  friend Expr operator-(Expr a, const Expr& b) { return a += b.scaled(-1); }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.constant != b.constant || a.terms.size() != b.terms.size()) return false;
    for (std::size_t i = 0; i < a.terms.size(); ++i)
      if (!(a.terms[i].var == b.terms[i].var) || a.terms[i].coeff != b.terms[i].coeff) return false;
    return true;
  }
};

// Replaces every variable v by sub(v), an expression; sub returns nullopt to keep v.
template <typename F>
Expr substitute(const Expr& e, F&& sub) {
  Expr r = Expr::of_const(e.constant);
  for (const auto& t : e.terms) {
    std::optional<Expr> s = sub(t.var);
    if (s)
      r += s->scaled(t.coeff);
    else
      r.add(t.var, t.coeff);
  }
  return r;
}

}  // namespace redcheck
