#pragma once

// Recursive-descent parser for the expression grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | ident | func '(' expr ')' | '(' expr ')'
//   ident   := 't' A | 'x' I | 'x' I '_' A    (decimal, 1-based)
//   func    := sin | cos | exp | log
//
// Exponents must fold to a rational constant.

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>

#include "jetgeom/expr.hpp"

namespace jetgeom {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

inline std::optional<Rational> to_rational(double v) {
  for (long den = 1; den <= 1000; ++den) {
    double num = std::round(v * static_cast<double>(den));
    if (std::fabs(num - v * static_cast<double>(den)) < 1e-9 && std::fabs(num) < 1e12)
      return Rational(static_cast<long>(num), den);
  }
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view text, Dims dims) : s_(text), dims_(dims) {}

  Expr run() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, at);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) {
        e = e * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = unary();
        if (d.is_zero()) fail_at("division by constant zero", at);
        e = e / d;
      } else {
        return e;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      std::size_t at = pos_;
      Expr ex = unary();
      if (!ex.is_constant()) fail_at("exponent must be a constant", at);
      auto r = to_rational(ex.constant_value());
      if (!r) fail_at("exponent must be rational", at);
      return make_pow(base, *r);
    }
    return base;
  }

  int index() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected index digits");
    return std::atoi(std::string(s_.substr(start, pos_ - start)).c_str());
  }

  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr number() {
    std::string buf(s_.substr(pos_));
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - buf.c_str());
    return Expr(v);
  }

  Expr identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string word(s_.substr(start, pos_ - start));
    if (word == "sin" || word == "cos" || word == "exp" || word == "log") {
      if (!accept('(')) fail("expected '(' after " + word);
      Expr a = expr();
      if (!accept(')')) fail("expected ')'");
      if (word == "sin") return sin(a);
      if (word == "cos") return cos(a);
      if (word == "exp") return exp(a);
      return log(a);
    }
    bool digits_follow =
        pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]));
    if (word == "t" && digits_follow) {
      int a = index();
      Variable v = Variable::t(a - 1);
      if (!v.in_range(dims_)) fail_at("index out of range in t" + std::to_string(a), start);
      return Expr::var(v);
    }
    if (word == "x" && digits_follow) {
      int i = index();
      if (pos_ < s_.size() && s_[pos_] == '_') {
        ++pos_;
        int a = index();
        Variable v = Variable::v(i - 1, a - 1);
        if (!v.in_range(dims_))
          fail_at("index out of range in x" + std::to_string(i) + "_" + std::to_string(a), start);
        return Expr::var(v);
      }
      Variable v = Variable::x(i - 1);
      if (!v.in_range(dims_)) fail_at("index out of range in x" + std::to_string(i), start);
      return Expr::var(v);
    }
    fail_at("unknown identifier '" + word + "'", start);
  }

  std::string_view s_;
  Dims dims_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text, Dims dims) { return detail::Parser(text, dims).run(); }

}  // namespace jetgeom
