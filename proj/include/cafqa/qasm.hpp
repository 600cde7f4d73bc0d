#pragma once
#include <cctype>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cafqa/circuit.hpp"
#include "cafqa/pauli.hpp"  // ParseError

namespace cafqa {

// OpenQASM 2.0 subset: header, one qreg, one creg, the supported gate set,
// `measure q[i] -> c[j]`, and // line comments. Angle expressions allow
// literals, pi, unary minus, `*` and `/`.

namespace detail {

struct Token {
  enum Kind { Ident, Number, Symbol, End } kind;
  std::string text;
  int line;
  int col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t{Token::End, "", line_, col_};
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Token::Ident;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        t.text += advance();
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      t.kind = Token::Number;
      bool seen_e = false;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d)) || d == '.') {
          t.text += advance();
        } else if ((d == 'e' || d == 'E') && !seen_e) {
          seen_e = true;
          t.text += advance();
          if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
            t.text += advance();
        } else {
          break;
        }
      }
      return t;
    }
    if (c == '"') {
      // string literal (only the include filename uses it)
      t.kind = Token::Symbol;
      t.text += advance();
      while (pos_ < src_.size() && src_[pos_] != '"') t.text += advance();
      if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.col);
      t.text += advance();
      return t;
    }
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      t.kind = Token::Symbol;
      t.text = "->";
      advance();
      advance();
      return t;
    }
    static const std::string singles = ";,()[]{}*/-+";
    if (singles.find(c) != std::string::npos) {
      t.kind = Token::Symbol;
      t.text = advance();
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class QasmParser {
 public:
  explicit QasmParser(const std::string& src) : lex_(src) { bump(); }

  Circuit parse() {
    expect_ident("OPENQASM");
    if (cur_.kind != Token::Number || cur_.text != "2.0")
      fail("expected version 2.0");
    bump();
    expect_symbol(";");
    if (cur_.kind == Token::Ident && cur_.text == "include") {
      bump();
      if (cur_.kind != Token::Symbol || cur_.text.front() != '"')
        fail("expected include filename");
      bump();
      expect_symbol(";");
    }

    Circuit c;
    bool have_qreg = false, have_creg = false;
    while (cur_.kind != Token::End) {
      if (cur_.kind != Token::Ident) fail("expected statement");
      std::string word = cur_.text;
      if (word == "qreg") {
        if (have_qreg) fail("duplicate qreg");
        bump();
        qreg_name_ = parse_reg_decl(c.n_qubits);
        measured_.assign(std::size_t(c.n_qubits), false);
        have_qreg = true;
      } else if (word == "creg") {
        if (have_creg) fail("duplicate creg");
        bump();
        creg_name_ = parse_reg_decl(c.n_clbits);
        have_creg = true;
      } else if (word == "measure") {
        if (!have_qreg || !have_creg) fail("measure before register declarations");
        bump();
        int q = parse_indexed(qreg_name_, c.n_qubits);
        expect_symbol("->");
        int cl = parse_indexed(creg_name_, c.n_clbits);
        expect_symbol(";");
        c.measure(q, cl);
        measured_[std::size_t(q)] = true;
      } else {
        GateKind kind;
        if (!gate_from_name(word, kind)) fail("unknown gate '" + word + "'");
        if (!have_qreg) fail("gate before qreg declaration");
        Token at = cur_;
        bump();
        std::vector<double> params;
        if (cur_.kind == Token::Symbol && cur_.text == "(") {
          bump();
          params.push_back(parse_expr());
          while (cur_.kind == Token::Symbol && cur_.text == ",") {
            bump();
            params.push_back(parse_expr());
          }
          expect_symbol(")");
        }
        if (int(params.size()) != gate_param_count(kind))
          fail_at(at, "gate '" + word + "' takes " +
                          std::to_string(gate_param_count(kind)) + " parameter(s)");
        std::vector<int> qubits;
        qubits.push_back(parse_indexed(qreg_name_, c.n_qubits));
        while (cur_.kind == Token::Symbol && cur_.text == ",") {
          bump();
          qubits.push_back(parse_indexed(qreg_name_, c.n_qubits));
        }
        expect_symbol(";");
        if (int(qubits.size()) != gate_arity(kind))
          fail_at(at, "gate '" + word + "' takes " +
                          std::to_string(gate_arity(kind)) + " qubit(s)");
        if (gate_arity(kind) == 2 && qubits[0] == qubits[1])
          fail_at(at, "two-qubit gate on identical qubits");
        for (int q : qubits)
          if (measured_.size() > std::size_t(q) && measured_[std::size_t(q)])
            fail_at(at, "gate after measurement on qubit " + std::to_string(q));
        c.gates.push_back({kind, std::move(params), std::move(qubits)});
      }
    }
    if (!have_qreg) fail("missing qreg declaration");
    if (!have_creg) fail("missing creg declaration");
    return c;
  }

 private:
  void bump() { cur_ = lex_.next(); }

  [[noreturn]] void fail(const std::string& msg) { fail_at(cur_, msg); }
  [[noreturn]] void fail_at(const Token& t, const std::string& msg) {
    throw ParseError(msg, t.line, t.col);
  }

  void expect_ident(const std::string& s) {
    if (cur_.kind != Token::Ident || cur_.text != s) fail("expected '" + s + "'");
    bump();
  }

  void expect_symbol(const std::string& s) {
    if (cur_.kind != Token::Symbol || cur_.text != s) fail("expected '" + s + "'");
    bump();
  }

  std::string parse_reg_decl(int& size_out) {
    if (cur_.kind != Token::Ident) fail("expected register name");
    std::string name = cur_.text;
    bump();
    expect_symbol("[");
    if (cur_.kind != Token::Number) fail("expected register size");
    size_out = std::stoi(cur_.text);
    if (size_out < 1) fail("register size must be positive");
    bump();
    expect_symbol("]");
    expect_symbol(";");
    return name;
  }

  int parse_indexed(const std::string& reg, int size) {
    if (cur_.kind != Token::Ident || cur_.text != reg)
      fail("expected register '" + reg + "'");
    bump();
    expect_symbol("[");
    if (cur_.kind != Token::Number) fail("expected index");
    Token at = cur_;
    int idx = std::stoi(cur_.text);
    bump();
    expect_symbol("]");
    if (idx < 0 || idx >= size)
      fail_at(at, "index " + std::to_string(idx) + " out of range [0," +
                      std::to_string(size) + ")");
    return idx;
  }

  // expr := unary { ('*'|'/') unary } ; unary := '-' unary | atom
  double parse_expr() {
    double v = parse_unary();
    while (cur_.kind == Token::Symbol && (cur_.text == "*" || cur_.text == "/")) {
      bool mul = cur_.text == "*";
      bump();
      double rhs = parse_unary();
      if (!mul && rhs == 0.0) fail("division by zero in angle expression");
      v = mul ? v * rhs : v / rhs;
    }
    return v;
  }

  double parse_unary() {
    if (cur_.kind == Token::Symbol && cur_.text == "-") {
      bump();
      return -parse_unary();
    }
    if (cur_.kind == Token::Ident && cur_.text == "pi") {
      bump();
      return std::numbers::pi;
    }
    if (cur_.kind == Token::Number) {
      double v = std::stod(cur_.text);
      bump();
      return v;
    }
    fail("expected angle expression");
  }

  Lexer lex_;
  Token cur_;
  std::string qreg_name_, creg_name_;
  std::vector<bool> measured_;
};

}  // namespace detail

inline Circuit parse_qasm(const std::string& text) {
  return detail::QasmParser(text).parse();
}

inline std::string serialize_qasm(const Circuit& c) {
  std::ostringstream out;
  out << "OPENQASM 2.0;\n";
  out << "include \"qelib1.inc\";\n";
  out << "qreg q[" << c.n_qubits << "];\n";
  out << "creg c[" << c.n_clbits << "];\n";
  char buf[64];
  for (const auto& g : c.gates) {
    out << gate_name(g.kind);
    if (!g.params.empty()) {
      out << "(";
      for (std::size_t i = 0; i < g.params.size(); ++i) {
        if (i) out << ",";
        std::snprintf(buf, sizeof buf, "%.17g", g.params[i]);
        out << buf;
      }
      out << ")";
    }
    out << " ";
    for (std::size_t i = 0; i < g.qubits.size(); ++i) {
      if (i) out << ",";
      out << "q[" << g.qubits[i] << "]";
    }
    out << ";\n";
  }
  for (auto [q, cl] : c.measurements)
    out << "measure q[" << q << "] -> c[" << cl << "];\n";
  return out.str();
}

}  // namespace cafqa
