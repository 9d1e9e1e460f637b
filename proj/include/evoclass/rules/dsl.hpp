#pragma once

// Boolean rule language used by the registry's validation and aggregation rules.
//
//   rule        := conjunction [ "implies" conjunction ]
//   conjunction := primary { "and" primary }
//   primary     := "(" conjunction ")" | predicate
//   predicate   := operand "->" "startswith" "(" string ")"
//                | operand ( "=" | "!=" ) string
//                | operand ( "in" | "notIn" ) list
//   operand     := field [ "->" "substring" "(" int "," int ")" ]
//   list        := "[" [ string { "," string } ] "]" | "{" list "}"
//
// substring(a,b) is 1-based and inclusive. "implies" is only legal at the top level.

#include <cstddef>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace evoclass::rules {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct FieldRef {
  std::string name;
  friend bool operator==(const FieldRef&, const FieldRef&) = default;
};

struct Substring {
  std::string field;
  int first = 1;
  int last = 1;
  friend bool operator==(const Substring&, const Substring&) = default;
};

using Operand = std::variant<FieldRef, Substring>;

struct StartsWith {
  Operand subject;
  std::string prefix;
};

// `=` when !negated, `!=` otherwise.
struct Compare {
  Operand lhs;
  bool negated = false;
  std::string literal;
};

// `in` when !negated, `notIn` otherwise.
struct Membership {
  Operand lhs;
  bool negated = false;
  std::vector<std::string> values;
};

struct Conjunction {
  std::vector<ExprPtr> terms;
};

struct Implication {
  ExprPtr antecedent;
  ExprPtr consequent;
};

struct Expr {
  std::variant<StartsWith, Compare, Membership, Conjunction, Implication> node;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownOperator };

  ParseError(Kind kind, std::size_t offset, const std::string& message)
      : std::runtime_error(message + " at offset " + std::to_string(offset)),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  // 1-based character (code point) offset into the rule text.
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

namespace detail {

enum class Tok { Ident, String, Int, LParen, RParen, LBracket, RBracket, LBrace, RBrace, Comma, Arrow, Eq, Neq, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;  // 1-based character offset
};

inline std::size_t char_offset(std::string_view text, std::size_t byte_pos) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < byte_pos && i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++chars;
  }
  return chars + 1;
}

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto syntax = [&](std::size_t pos, const std::string& msg) {
    return ParseError(ParseError::Kind::Syntax, char_offset(text, pos), msg);
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    auto push = [&](Tok kind, std::string t) { out.push_back({kind, std::move(t), char_offset(text, start)}); };
    switch (c) {
      case '(': push(Tok::LParen, "("); ++i; continue;
      case ')': push(Tok::RParen, ")"); ++i; continue;
      case '[': push(Tok::LBracket, "["); ++i; continue;
      case ']': push(Tok::RBracket, "]"); ++i; continue;
      case '{': push(Tok::LBrace, "{"); ++i; continue;
      case '}': push(Tok::RBrace, "}"); ++i; continue;
      case ',': push(Tok::Comma, ","); ++i; continue;
      case '=': push(Tok::Eq, "="); ++i; continue;
      default: break;
    }
    if (c == '!' && i + 1 < text.size() && text[i + 1] == '=') {
      push(Tok::Neq, "!=");
      i += 2;
    } else if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
      push(Tok::Arrow, "->");
      i += 2;
    } else if (c == '\'' || c == '"') {
      std::string lit;
      ++i;
      while (i < text.size() && text[i] != c) lit += text[i++];
      if (i >= text.size()) throw syntax(start, "unterminated string literal");
      ++i;
      push(Tok::String, std::move(lit));
    } else if (is_digit(c)) {
      std::string num;
      while (i < text.size() && is_digit(text[i])) num += text[i++];
      push(Tok::Int, std::move(num));
    } else if (is_ident_start(c)) {
      std::string id;
      while (i < text.size() && is_ident_char(text[i])) id += text[i++];
      push(Tok::Ident, std::move(id));
    } else {
      throw syntax(start, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", char_offset(text, text.size())});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  ExprPtr parse_rule() {
    ExprPtr lhs = parse_conjunction();
    if (peek_keyword("implies")) {
      advance();
      ExprPtr rhs = parse_conjunction();
      if (peek_keyword("implies")) fail("'implies' may appear only once, at the top level");
      lhs = make(Implication{std::move(lhs), std::move(rhs)});
    }
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return lhs;
  }

 private:
  template <typename Node>
  static ExprPtr make(Node node) {
    return std::make_shared<const Expr>(Expr{std::move(node)});
  }

  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool peek_keyword(std::string_view kw) const { return peek().kind == Tok::Ident && peek().text == kw; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(ParseError::Kind::Syntax, peek().offset, msg);
  }

  const Token& expect(Tok kind, std::string_view what) {
    if (peek().kind != kind) {
      fail("expected " + std::string(what) + (peek().kind == Tok::End ? " but reached end" : " near '" + peek().text + "'"));
    }
    return advance();
  }

  ExprPtr parse_conjunction() {
    std::vector<ExprPtr> terms;
    terms.push_back(parse_primary());
    while (peek_keyword("and")) {
      advance();
      terms.push_back(parse_primary());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return make(Conjunction{std::move(terms)});
  }

  ExprPtr parse_primary() {
    if (peek().kind == Tok::LParen) {
      advance();
      ExprPtr inner = parse_conjunction();
      if (peek_keyword("implies")) fail("'implies' is only allowed at the top level");
      expect(Tok::RParen, "')'");
      return inner;
    }
    return parse_predicate();
  }

  ExprPtr parse_predicate() {
    const Token& head = expect(Tok::Ident, "field name");
    if (is_keyword(head.text)) {
      throw ParseError(ParseError::Kind::Syntax, head.offset, "expected field name, found keyword '" + head.text + "'");
    }
    Operand operand = FieldRef{head.text};
    if (peek().kind == Tok::Arrow) {
      advance();
      const Token& method = expect(Tok::Ident, "operator name after '->'");
      if (method.text == "startswith") {
        expect(Tok::LParen, "'('");
        std::string prefix = expect(Tok::String, "string literal").text;
        expect(Tok::RParen, "')'");
        return make(StartsWith{std::move(operand), std::move(prefix)});
      }
      if (method.text == "substring") {
        expect(Tok::LParen, "'('");
        const Token& a = expect(Tok::Int, "integer");
        expect(Tok::Comma, "','");
        const Token& b = expect(Tok::Int, "integer");
        expect(Tok::RParen, "')'");
        const int first = to_index(a);
        const int last = to_index(b);
        if (first < 1 || first > last) {
          throw ParseError(ParseError::Kind::Syntax, a.offset, "substring indices must satisfy 1 <= a <= b");
        }
        operand = Substring{head.text, first, last};
      } else {
        throw ParseError(ParseError::Kind::UnknownOperator, method.offset, "unknown operator '" + method.text + "'");
      }
    }
    const Token& op = peek();
    switch (op.kind) {
      case Tok::Eq:
      case Tok::Neq: {
        const bool negated = op.kind == Tok::Neq;
        advance();
        std::string literal = expect(Tok::String, "string literal").text;
        return make(Compare{std::move(operand), negated, std::move(literal)});
      }
      case Tok::Ident: {
        if (op.text == "in" || op.text == "notIn") {
          const bool negated = op.text == "notIn";
          advance();
          return make(Membership{std::move(operand), negated, parse_list()});
        }
        if (op.text == "and" || op.text == "implies") fail("expected comparison operator");
        throw ParseError(ParseError::Kind::UnknownOperator, op.offset, "unknown operator '" + op.text + "'");
      }
      default:
        fail("expected comparison operator");
    }
  }

  std::vector<std::string> parse_list() {
    if (peek().kind == Tok::LBrace) {
      advance();
      auto inner = parse_list();
      expect(Tok::RBrace, "'}'");
      return inner;
    }
    expect(Tok::LBracket, "'['");
    std::vector<std::string> values;
    if (peek().kind != Tok::RBracket) {
      values.push_back(expect(Tok::String, "string literal").text);
      while (peek().kind == Tok::Comma) {
        advance();
        values.push_back(expect(Tok::String, "string literal").text);
      }
    }
    expect(Tok::RBracket, "']'");
    return values;
  }

  static bool is_keyword(std::string_view s) { return s == "and" || s == "implies" || s == "in" || s == "notIn"; }

  static int to_index(const Token& t) {
    if (t.text.size() > 6) throw ParseError(ParseError::Kind::Syntax, t.offset, "index out of range");
    return std::stoi(t.text);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

inline void collect_fields(const Operand& op, std::set<std::string>& out) {
  std::visit([&](const auto& o) {
    if constexpr (std::is_same_v<std::decay_t<decltype(o)>, FieldRef>) {
      out.insert(o.name);
    } else {
      out.insert(o.field);
    }
  }, op);
}

inline std::string quote(std::string_view s) {
  // Prefer single quotes as in the registry's rule sheets.
  const char q = s.find('\'') == std::string_view::npos ? '\'' : '"';
  return q + std::string(s) + q;
}

inline std::string print_operand(const Operand& op) {
  return std::visit([](const auto& o) -> std::string {
    if constexpr (std::is_same_v<std::decay_t<decltype(o)>, FieldRef>) {
      return o.name;
    } else {
      return o.field + " ->substring(" + std::to_string(o.first) + "," + std::to_string(o.last) + ")";
    }
  }, op);
}

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text) { return detail::Parser(text).parse_rule(); }

// Field names referenced anywhere in the expression, spelled as written.
inline std::set<std::string> referenced_fields(const Expr& expr) {
  std::set<std::string> out;
  auto walk = [&](auto&& self, const Expr& e) -> void {
    std::visit([&](const auto& n) {
      using N = std::decay_t<decltype(n)>;
      if constexpr (std::is_same_v<N, StartsWith>) {
        detail::collect_fields(n.subject, out);
      } else if constexpr (std::is_same_v<N, Compare> || std::is_same_v<N, Membership>) {
        detail::collect_fields(n.lhs, out);
      } else if constexpr (std::is_same_v<N, Conjunction>) {
        for (const auto& t : n.terms) self(self, *t);
      } else {
        self(self, *n.antecedent);
        self(self, *n.consequent);
      }
    }, e.node);
  };
  walk(walk, expr);
  return out;
}

// Canonical text form; parse_expr(print_expr(e)) is structurally equal to e.
inline std::string print_expr(const Expr& expr, bool nested = false) {
  return std::visit([&](const auto& n) -> std::string {
    using N = std::decay_t<decltype(n)>;
    if constexpr (std::is_same_v<N, StartsWith>) {
      return detail::print_operand(n.subject) + " ->startswith(" + detail::quote(n.prefix) + ")";
    } else if constexpr (std::is_same_v<N, Compare>) {
      return detail::print_operand(n.lhs) + (n.negated ? " != " : " = ") + detail::quote(n.literal);
    } else if constexpr (std::is_same_v<N, Membership>) {
      std::string s = detail::print_operand(n.lhs) + (n.negated ? " notIn [" : " in [");
      for (std::size_t i = 0; i < n.values.size(); ++i) {
        if (i) s += ", ";
        s += detail::quote(n.values[i]);
      }
      return s + "]";
    } else if constexpr (std::is_same_v<N, Conjunction>) {
      std::string s;
      for (std::size_t i = 0; i < n.terms.size(); ++i) {
        if (i) s += " and ";
        s += print_expr(*n.terms[i], true);
      }
      return nested ? "(" + s + ")" : s;
    } else {
      return print_expr(*n.antecedent, true) + " implies " + print_expr(*n.consequent, true);
    }
  }, expr.node);
}

}  // namespace evoclass::rules
