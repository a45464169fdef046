#pragma once

#include <cctype>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "redcheck/core.hpp"

namespace redcheck {

enum class Tok { ident, number, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  Position pos;
};

// Shared tokenizer for .red and .snt sources. Identifiers may carry primes and
// dotted suffixes (x', max.1) so renamed machines print back losslessly.
inline std::vector<Token> tokenize(std::string_view src) {
  static const char* const kTwoChar[] = {":=", "+=", "->", "==", "&&"};
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Position pos{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size()) {
        char d = src[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '\'') {
          ++j;
        } else if (d == '.' && j + 1 < src.size() &&
                   std::isalnum(static_cast<unsigned char>(src[j + 1]))) {
          ++j;
        } else {
          break;
        }
      }
      out.push_back({Tok::ident, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::number, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    bool two = false;
    if (i + 1 < src.size()) {
      for (const char* t : kTwoChar) {
        if (src[i] == t[0] && src[i + 1] == t[1]) {
          out.push_back({Tok::punct, std::string(t), pos});
          advance(2);
          two = true;
          break;
        }
      }
    }
    if (two) continue;
    static const std::string_view kSingle = "{}()[];,+-*/<>=&";
    if (kSingle.find(c) == std::string_view::npos)
      throw ParseError(pos, std::string("unexpected character '") + c + "'");
    out.push_back({Tok::punct, std::string(1, c), pos});
    advance(1);
  }
  out.push_back({Tok::end, "", Position{line, col}});
  return out;
}

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t k = pos_ + ahead;
    return k < toks_.size() ? toks_[k] : toks_.back();
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::end; }

  bool is(std::string_view text) const {
    const Token& t = peek();
    return (t.kind == Tok::punct || t.kind == Tok::ident) && t.text == text;
  }
  bool accept(std::string_view text) {
    if (!is(text)) return false;
    next();
    return true;
  }

  [[noreturn]] void fail(std::initializer_list<std::string_view> expected) const {
    std::string msg = "expected ";
    bool first = true;
    for (auto e : expected) {
      if (!first) msg += " or ";
      msg += "'" + std::string(e) + "'";
      first = false;
    }
    const Token& t = peek();
    msg += t.kind == Tok::end ? " but reached end of input" : " but found '" + t.text + "'";
    throw ParseError(t.pos, msg);
  }

  const Token& expect(std::string_view text) {
    if (!is(text)) fail({text});
    return next();
  }

  const Token& expect_ident() {
    if (peek().kind != Tok::ident) fail({"identifier"});
    return next();
  }

  Value expect_number() {
    const Token& t = peek();
    if (t.kind != Tok::number) fail({"integer"});
    next();
    try {
      std::size_t used = 0;
      long long v = std::stoll(t.text, &used);
      return static_cast<Value>(v);
    } catch (const std::exception&) {
      throw ParseError(t.pos, "integer literal out of 64-bit range");
    }
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace redcheck
