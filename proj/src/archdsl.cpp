// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/archdsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <set>
#include <sstream>

namespace nadkit::dsl {

// ---------------------------------------------------------------------------
// Variables

std::string_view var_name(Var v) noexcept {
  switch (v) {
    case Var::kB: return "B";
    case Var::kC: return "C";
    case Var::kDim: return "dim";
    case Var::kH: return "H";
    case Var::kW: return "W";
  }
  return "?";
}

std::optional<Var> var_from_name(std::string_view name) noexcept {
  if (name == "B") return Var::kB;
  if (name == "C") return Var::kC;
  if (name == "dim") return Var::kDim;
  if (name == "H") return Var::kH;
  if (name == "W") return Var::kW;
  return std::nullopt;
}

std::int64_t VarBinding::get(Var v) const noexcept {
  switch (v) {
    case Var::kB: return B;
    case Var::kC: return C;
    case Var::kDim: return dim;
    case Var::kH: return H;
    case Var::kW: return W;
  }
  return 0;
}

std::string VarBinding::to_string() const {
  std::ostringstream os;
  os << "B=" << B << ",C=" << C << ",H=" << H << ",W=" << W << ",dim=" << dim;
  return os.str();
}

// ---------------------------------------------------------------------------
// ParamExpr

struct ParamExpr::Node {
  Kind kind = Kind::kLiteral;
  std::int64_t value = 0;
  Var var = Var::kC;
  BinOp op = BinOp::kAdd;
  ParamExpr a;
  ParamExpr b;
};

ParamExpr::ParamExpr() : node_(nullptr) {}

ParamExpr ParamExpr::literal(std::int64_t value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kLiteral;
  n->value = value;
  return ParamExpr(std::move(n));
}

ParamExpr ParamExpr::variable(Var v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kVariable;
  n->var = v;
  return ParamExpr(std::move(n));
}

ParamExpr ParamExpr::negate(ParamExpr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kNegate;
  n->a = std::move(operand);
  return ParamExpr(std::move(n));
}

ParamExpr ParamExpr::binary(BinOp op, ParamExpr lhs, ParamExpr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kBinary;
  n->op = op;
  n->a = std::move(lhs);
  n->b = std::move(rhs);
  return ParamExpr(std::move(n));
}

// A null node is the literal 0. Node holds ParamExpr members, so the default
// constructor must not allocate.
ParamExpr::Kind ParamExpr::kind() const noexcept {
  return node_ ? node_->kind : Kind::kLiteral;
}
std::int64_t ParamExpr::value() const { return node_ ? node_->value : 0; }
Var ParamExpr::var() const { return node_->var; }
ParamExpr::BinOp ParamExpr::op() const { return node_->op; }
const ParamExpr& ParamExpr::lhs() const { return node_->a; }
const ParamExpr& ParamExpr::rhs() const { return node_->b; }
const ParamExpr& ParamExpr::operand() const { return node_->a; }

bool ParamExpr::depends_on(Var v) const noexcept {
  switch (kind()) {
    case Kind::kLiteral: return false;
    case Kind::kVariable: return var() == v;
    case Kind::kNegate: return operand().depends_on(v);
    case Kind::kBinary: return lhs().depends_on(v) || rhs().depends_on(v);
  }
  return false;
}

bool ParamExpr::is_constant() const noexcept {
  switch (kind()) {
    case Kind::kLiteral: return true;
    case Kind::kVariable: return false;
    case Kind::kNegate: return operand().is_constant();
    case Kind::kBinary: return lhs().is_constant() && rhs().is_constant();
  }
  return true;
}

bool operator==(const ParamExpr& a, const ParamExpr& b) noexcept {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ParamExpr::Kind::kLiteral: return a.value() == b.value();
    case ParamExpr::Kind::kVariable: return a.var() == b.var();
    case ParamExpr::Kind::kNegate: return a.operand() == b.operand();
    case ParamExpr::Kind::kBinary:
      return a.op() == b.op() && a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
  return false;
}

namespace {

int precedence(const ParamExpr& e) {
  switch (e.kind()) {
    case ParamExpr::Kind::kLiteral:
      // Negative literals print with a leading minus; treat them like a
      // negation so they get parenthesized as binary operands.
      return e.value() < 0 ? 3 : 4;
    case ParamExpr::Kind::kVariable: return 4;
    case ParamExpr::Kind::kNegate: return 3;
    case ParamExpr::Kind::kBinary:
      return (e.op() == ParamExpr::BinOp::kAdd || e.op() == ParamExpr::BinOp::kSub) ? 1 : 2;
  }
  return 4;
}

char op_char(ParamExpr::BinOp op) {
  switch (op) {
    case ParamExpr::BinOp::kAdd: return '+';
    case ParamExpr::BinOp::kSub: return '-';
    case ParamExpr::BinOp::kMul: return '*';
    case ParamExpr::BinOp::kDiv: return '/';
  }
  return '?';
}

void render(const ParamExpr& e, std::string& out) {
  switch (e.kind()) {
    case ParamExpr::Kind::kLiteral:
      out += std::to_string(e.value());
      return;
    case ParamExpr::Kind::kVariable:
      out += var_name(e.var());
      return;
    case ParamExpr::Kind::kNegate: {
      const ParamExpr& x = e.operand();
      // "-(3)" keeps Negate(Literal 3) distinct from Literal(-3) on re-parse.
      bool wrap = precedence(x) < 4 || x.kind() == ParamExpr::Kind::kLiteral;
      out += '-';
      if (wrap) out += '(';
      render(x, out);
      if (wrap) out += ')';
      return;
    }
    case ParamExpr::Kind::kBinary: {
      int p = precedence(e);
      bool wrap_l = precedence(e.lhs()) < p || precedence(e.lhs()) == 3;
      // Left-associative: a right operand of equal precedence needs parens.
      bool wrap_r = precedence(e.rhs()) <= p || precedence(e.rhs()) == 3;
      if (wrap_l) out += '(';
      render(e.lhs(), out);
      if (wrap_l) out += ')';
      out += op_char(e.op());
      if (wrap_r) out += '(';
      render(e.rhs(), out);
      if (wrap_r) out += ')';
      return;
    }
  }
}

}  // namespace

std::string ParamExpr::to_string() const {
  std::string out;
  render(*this, out);
  return out;
}

// ---------------------------------------------------------------------------
// Expression parsing

namespace {

constexpr int kMaxExprDepth = 64;

class ExprParser {
 public:
  ExprParser(std::string_view text, int line) : s_(text), line_(line) {}

  ParamExpr parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("empty parameter expression");
    ParamExpr e = parse_sum(0);
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(s_.substr(pos_, 1)) + "' in parameter expression");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError(line_, "unparseable parameter expression '" + std::string(s_) + "': " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  // Returns the operator at pos_ without consuming it: '+', '-', '*', '/'
  // (also the Unicode minus and multiplication signs), or 0.
  char peek_op(std::size_t* width) const {
    if (pos_ >= s_.size()) return 0;
    char c = s_[pos_];
    if (c == '+' || c == '-' || c == '*' || c == '/') {
      *width = 1;
      return c;
    }
    if (s_.substr(pos_, 2) == "\xC3\x97") {  // U+00D7
      *width = 2;
      return '*';
    }
    if (s_.substr(pos_, 3) == "\xE2\x88\x92") {  // U+2212
      *width = 3;
      return '-';
    }
    return 0;
  }

  ParamExpr parse_sum(int depth) {
    ParamExpr lhs = parse_product(depth);
    for (;;) {
      skip_ws();
      std::size_t w = 0;
      char c = peek_op(&w);
      if (c != '+' && c != '-') return lhs;
      pos_ += w;
      ParamExpr rhs = parse_product(depth);
      lhs = ParamExpr::binary(c == '+' ? ParamExpr::BinOp::kAdd : ParamExpr::BinOp::kSub,
                              std::move(lhs), std::move(rhs));
    }
  }

  ParamExpr parse_product(int depth) {
    ParamExpr lhs = parse_factor(depth);
    for (;;) {
      skip_ws();
      std::size_t w = 0;
      char c = peek_op(&w);
      if (c != '*' && c != '/') return lhs;
      pos_ += w;
      ParamExpr rhs = parse_factor(depth);
      lhs = ParamExpr::binary(c == '*' ? ParamExpr::BinOp::kMul : ParamExpr::BinOp::kDiv,
                              std::move(lhs), std::move(rhs));
    }
  }

  ParamExpr parse_factor(int depth) {
    if (depth > kMaxExprDepth) fail("nesting too deep");
    skip_ws();
    if (pos_ >= s_.size()) fail("missing operand");
    std::size_t w = 0;
    if (peek_op(&w) == '-') {
      pos_ += w;
      skip_ws();
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        return ParamExpr::literal(parse_int(true));
      }
      return ParamExpr::negate(parse_factor(depth + 1));
    }
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ParamExpr inner = parse_sum(depth + 1);
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return ParamExpr::literal(parse_int(false));
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      std::string_view ident = s_.substr(start, pos_ - start);
      auto v = var_from_name(ident);
      if (!v) fail("unknown variable '" + std::string(ident) + "'");
      return ParamExpr::variable(*v);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::int64_t parse_int(bool negative) {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string digits(s_.substr(start, pos_ - start));
    if (negative) digits.insert(digits.begin(), '-');
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) fail("integer out of range");
    return v;
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace

ParamExpr parse_expr(std::string_view text) { return ExprParser(text, 1).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Takes the result by pointer: it must be read after the builtin has run.
std::int64_t checked(bool overflow, const std::int64_t* v, const ParamExpr& e) {
  if (overflow) throw EvalError(EvalError::Kind::kOverflow, "integer overflow in " + e.to_string());
  return *v;
}

}  // namespace

std::int64_t eval_expr(const ParamExpr& e, const VarBinding& b) {
  switch (e.kind()) {
    case ParamExpr::Kind::kLiteral: return e.value();
    case ParamExpr::Kind::kVariable: return b.get(e.var());
    case ParamExpr::Kind::kNegate: {
      std::int64_t x = eval_expr(e.operand(), b);
      std::int64_t r = 0;
      return checked(__builtin_sub_overflow(std::int64_t{0}, x, &r), &r, e);
    }
    case ParamExpr::Kind::kBinary: {
      std::int64_t x = eval_expr(e.lhs(), b);
      std::int64_t y = eval_expr(e.rhs(), b);
      std::int64_t r = 0;
      switch (e.op()) {
        case ParamExpr::BinOp::kAdd: return checked(__builtin_add_overflow(x, y, &r), &r, e);
        case ParamExpr::BinOp::kSub: return checked(__builtin_sub_overflow(x, y, &r), &r, e);
        case ParamExpr::BinOp::kMul: return checked(__builtin_mul_overflow(x, y, &r), &r, e);
        case ParamExpr::BinOp::kDiv:
          if (y == 0) {
            throw EvalError(EvalError::Kind::kDivisionByZero, "division by zero in " + e.to_string());
          }
          if (x == std::numeric_limits<std::int64_t>::min() && y == -1) {
            throw EvalError(EvalError::Kind::kOverflow, "integer overflow in " + e.to_string());
          }
          if (x % y != 0) {
            throw EvalError(EvalError::Kind::kInexactDivision,
                            "inexact division " + e.to_string() + " (" + std::to_string(x) + "/" +
                                std::to_string(y) + ")");
          }
          return x / y;
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

struct Term {
  bool negative;
  ParamExpr expr;
};

void collect_terms(const ParamExpr& e, bool negative, std::vector<Term>& out) {
  if (e.kind() == ParamExpr::Kind::kBinary &&
      (e.op() == ParamExpr::BinOp::kAdd || e.op() == ParamExpr::BinOp::kSub)) {
    collect_terms(e.lhs(), negative, out);
    collect_terms(e.rhs(), e.op() == ParamExpr::BinOp::kSub ? !negative : negative, out);
    return;
  }
  if (e.kind() == ParamExpr::Kind::kNegate) {
    collect_terms(e.operand(), !negative, out);
    return;
  }
  out.push_back({negative, e});
}

void collect_factors(const ParamExpr& e, std::vector<ParamExpr>& out) {
  if (e.kind() == ParamExpr::Kind::kBinary && e.op() == ParamExpr::BinOp::kMul) {
    collect_factors(e.lhs(), out);
    collect_factors(e.rhs(), out);
    return;
  }
  out.push_back(e);
}

ParamExpr norm(const ParamExpr& e, const PartialBinding& bound);

ParamExpr norm_sum(const ParamExpr& e, const PartialBinding& bound) {
  std::vector<Term> raw;
  collect_terms(e, false, raw);
  std::int64_t constant = 0;
  bool constant_ok = true;
  std::vector<Term> terms;
  for (auto& t : raw) {
    ParamExpr n = norm(t.expr, bound);
    // A normalized term may itself be a sum or a negation; flatten again.
    std::vector<Term> sub;
    collect_terms(n, t.negative, sub);
    for (auto& s : sub) {
      if (s.expr.kind() == ParamExpr::Kind::kLiteral && constant_ok) {
        std::int64_t v = s.expr.value();
        std::int64_t r = 0;
        bool of = s.negative ? __builtin_sub_overflow(constant, v, &r)
                             : __builtin_add_overflow(constant, v, &r);
        if (!of) {
          constant = r;
          continue;
        }
        constant_ok = false;
      }
      terms.push_back(s);
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    std::string sa = a.expr.to_string();
    std::string sb = b.expr.to_string();
    if (sa != sb) return sa < sb;
    return a.negative < b.negative;
  });
  // Put a positive term first so the chain does not start with a negation.
  auto first_pos = std::find_if(terms.begin(), terms.end(), [](const Term& t) { return !t.negative; });
  if (first_pos != terms.end()) std::rotate(terms.begin(), first_pos, first_pos + 1);

  std::optional<ParamExpr> acc;
  for (auto& t : terms) {
    if (!acc) {
      acc = t.negative ? ParamExpr::negate(t.expr) : t.expr;
    } else {
      acc = ParamExpr::binary(t.negative ? ParamExpr::BinOp::kSub : ParamExpr::BinOp::kAdd, *acc, t.expr);
    }
  }
  if (!acc) return ParamExpr::literal(constant);
  if (constant > 0) return ParamExpr::binary(ParamExpr::BinOp::kAdd, *acc, ParamExpr::literal(constant));
  if (constant < 0 && constant != std::numeric_limits<std::int64_t>::min()) {
    return ParamExpr::binary(ParamExpr::BinOp::kSub, *acc, ParamExpr::literal(-constant));
  }
  if (constant < 0) return ParamExpr::binary(ParamExpr::BinOp::kAdd, *acc, ParamExpr::literal(constant));
  return *acc;
}

ParamExpr norm_product(const ParamExpr& e, const PartialBinding& bound) {
  std::vector<ParamExpr> raw;
  collect_factors(e, raw);
  std::int64_t coeff = 1;
  std::vector<ParamExpr> factors;
  for (auto& f : raw) {
    ParamExpr n = norm(f, bound);
    bool neg = false;
    if (n.kind() == ParamExpr::Kind::kNegate) {
      neg = true;
      n = n.operand();
    }
    std::vector<ParamExpr> sub;
    collect_factors(n, sub);
    for (auto& s : sub) {
      if (s.kind() == ParamExpr::Kind::kLiteral) {
        std::int64_t r = 0;
        if (!__builtin_mul_overflow(coeff, s.value(), &r)) {
          coeff = r;
          continue;
        }
      }
      factors.push_back(s);
    }
    if (neg) {
      if (coeff != std::numeric_limits<std::int64_t>::min()) {
        coeff = -coeff;
      } else {
        factors.push_back(ParamExpr::literal(-1));
      }
    }
  }
  if (coeff == 0) return ParamExpr::literal(0);
  std::stable_sort(factors.begin(), factors.end(), [](const ParamExpr& a, const ParamExpr& b) {
    return a.to_string() < b.to_string();
  });
  std::optional<ParamExpr> acc;
  for (auto& f : factors) {
    acc = acc ? ParamExpr::binary(ParamExpr::BinOp::kMul, *acc, f) : f;
  }
  if (!acc) return ParamExpr::literal(coeff);
  if (coeff == 1) return *acc;
  if (coeff == -1) return ParamExpr::negate(*acc);
  if (coeff < 0 && coeff != std::numeric_limits<std::int64_t>::min()) {
    return ParamExpr::negate(ParamExpr::binary(ParamExpr::BinOp::kMul, ParamExpr::literal(-coeff), *acc));
  }
  return ParamExpr::binary(ParamExpr::BinOp::kMul, ParamExpr::literal(coeff), *acc);
}

ParamExpr norm(const ParamExpr& e, const PartialBinding& bound) {
  switch (e.kind()) {
    case ParamExpr::Kind::kLiteral: return e;
    case ParamExpr::Kind::kVariable: {
      auto it = bound.find(e.var());
      return it == bound.end() ? e : ParamExpr::literal(it->second);
    }
    case ParamExpr::Kind::kNegate: {
      ParamExpr n = norm(e.operand(), bound);
      if (n.kind() == ParamExpr::Kind::kLiteral && n.value() != std::numeric_limits<std::int64_t>::min()) {
        return ParamExpr::literal(-n.value());
      }
      if (n.kind() == ParamExpr::Kind::kNegate) return n.operand();
      if (n.kind() == ParamExpr::Kind::kBinary &&
          (n.op() == ParamExpr::BinOp::kAdd || n.op() == ParamExpr::BinOp::kSub)) {
        return norm_sum(ParamExpr::negate(n), {});
      }
      return ParamExpr::negate(n);
    }
    case ParamExpr::Kind::kBinary:
      switch (e.op()) {
        case ParamExpr::BinOp::kAdd:
        case ParamExpr::BinOp::kSub: return norm_sum(e, bound);
        case ParamExpr::BinOp::kMul: return norm_product(e, bound);
        case ParamExpr::BinOp::kDiv: {
          ParamExpr l = norm(e.lhs(), bound);
          ParamExpr r = norm(e.rhs(), bound);
          if (r.is_literal(1)) return l;
          if (l.kind() == ParamExpr::Kind::kLiteral && r.kind() == ParamExpr::Kind::kLiteral &&
              r.value() != 0 && l.value() % r.value() == 0 &&
              !(l.value() == std::numeric_limits<std::int64_t>::min() && r.value() == -1)) {
            return ParamExpr::literal(l.value() / r.value());
          }
          return ParamExpr::binary(ParamExpr::BinOp::kDiv, l, r);
        }
      }
  }
  return e;
}

}  // namespace

ParamExpr normalize(const ParamExpr& expr, const PartialBinding& bound) { return norm(expr, bound); }

// ---------------------------------------------------------------------------
// Catalog

namespace {

std::vector<OpSpec> build_catalog() {
  auto p = [](std::string_view name) { return ParamSpec{name, std::nullopt, {}}; };
  auto d = [](std::string_view name, std::int64_t v) { return ParamSpec{name, v, {}}; };
  auto from = [](std::string_view name, std::string_view src) { return ParamSpec{name, std::nullopt, src}; };
  return {
      {"input", Arity::kSource, {}},
      {"output", Arity::kSink, {}},
      {"Conv2d", Arity::kUnary,
       {p("out_channels"), p("kernel_size"), d("stride", 1), d("dilation", 1), d("groups", 1)}},
      {"Linear", Arity::kUnary, {p("out_channels")}},
      {"AvgPool2d", Arity::kUnary, {p("kernel_size"), from("stride", "kernel_size")}},
      {"MaxPool2d", Arity::kUnary, {p("kernel_size"), from("stride", "kernel_size")}},
      {"AdaptiveMaxPool2d", Arity::kUnary, {p("output_size")}},
      {"AdaptiveAvgPool2d", Arity::kUnary, {p("output_size")}},
      {"Add", Arity::kMulti, {}},
      {"Mul", Arity::kMulti, {}},
      {"Multiply", Arity::kMulti, {}},
      {"concat", Arity::kMulti, {p("dim")}},
      {"mean", Arity::kUnary, {p("dim")}},
      {"max", Arity::kUnary, {p("dim")}},
      {"sum", Arity::kUnary, {p("dim")}},
      {"softmax", Arity::kUnary, {p("dim")}},
      {"ReLU", Arity::kUnary, {}},
      {"GELU", Arity::kUnary, {}},
      {"Sigmoid", Arity::kUnary, {}},
      {"BN", Arity::kUnary, {}},
      {"LN", Arity::kUnary, {}},
      {"permute", Arity::kUnary, {}, true},
      {"repeat", Arity::kUnary, {}, true},
      {"reshape", Arity::kUnary, {}, true},
  };
}

const std::vector<OpSpec>& catalog_storage() {
  static const std::vector<OpSpec> kCatalog = build_catalog();
  return kCatalog;
}

}  // namespace

std::span<const OpSpec> catalog() noexcept { return catalog_storage(); }

const OpSpec* find_op(std::string_view name) noexcept {
  for (const auto& spec : catalog_storage()) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// OpInstance

const ParamExpr& ResolvedArgs::at(std::string_view name) const {
  for (const auto& [n, v] : named) {
    if (n == name) return v;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

std::optional<ResolvedArgs> OpInstance::resolve(std::string* error) const {
  auto fail = [&](std::string why) -> std::optional<ResolvedArgs> {
    if (error) *error = std::move(why);
    return std::nullopt;
  };
  const OpSpec* s = spec();
  if (!s) return fail("Undefined computation " + op + " is used");

  ResolvedArgs out;
  if (s->variadic) {
    for (const auto& a : args) {
      if (a.name) return fail(op + " takes positional arguments only, got '" + *a.name + "='");
      out.list.push_back(a.value);
    }
    if (out.list.empty()) return fail(op + " needs at least one argument");
    return out;
  }

  std::vector<std::optional<ParamExpr>> slots(s->params.size());
  std::size_t positional = 0;
  bool seen_named = false;
  for (const auto& a : args) {
    if (!a.name) {
      if (seen_named) return fail(op + ": positional argument after named argument");
      if (positional >= s->params.size()) {
        return fail(op + " takes at most " + std::to_string(s->params.size()) + " arguments, got " +
                    std::to_string(args.size()));
      }
      slots[positional++] = a.value;
      continue;
    }
    seen_named = true;
    auto it = std::find_if(s->params.begin(), s->params.end(),
                           [&](const ParamSpec& ps) { return ps.name == *a.name; });
    if (it == s->params.end()) return fail(op + " has no parameter named '" + *a.name + "'");
    auto idx = static_cast<std::size_t>(it - s->params.begin());
    if (slots[idx]) return fail(op + ": parameter '" + *a.name + "' given twice");
    slots[idx] = a.value;
  }
  for (std::size_t i = 0; i < s->params.size(); ++i) {
    const ParamSpec& ps = s->params[i];
    if (!slots[i]) {
      if (ps.default_value) {
        slots[i] = ParamExpr::literal(*ps.default_value);
      } else if (!ps.default_from.empty()) {
        for (std::size_t j = 0; j < i; ++j) {
          if (s->params[j].name == ps.default_from) slots[i] = slots[j];
        }
      } else {
        return fail(op + " is missing required parameter '" + std::string(ps.name) + "'");
      }
    }
    out.named.emplace_back(std::string(ps.name), *slots[i]);
  }
  return out;
}

std::string OpInstance::to_string() const {
  std::string out = op;
  std::vector<std::string> parts;
  if (auto resolved = resolve()) {
    const OpSpec* s = spec();
    if (s->variadic) {
      for (const auto& v : resolved->list) parts.push_back(v.to_string());
    } else {
      for (std::size_t i = 0; i < s->params.size(); ++i) {
        const ParamSpec& ps = s->params[i];
        const ParamExpr& v = resolved->named[i].second;
        bool is_default = false;
        if (ps.default_value) {
          is_default = v.is_literal(*ps.default_value);
        } else if (!ps.default_from.empty()) {
          is_default = v == resolved->at(ps.default_from);
        }
        if (!is_default) parts.push_back(std::string(ps.name) + "=" + v.to_string());
      }
    }
  } else {
    for (const auto& a : args) {
      parts.push_back(a.name ? *a.name + "=" + a.value.to_string() : a.value.to_string());
    }
  }
  if (!parts.empty()) {
    out += '(';
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ',';
      out += parts[i];
    }
    out += ')';
  }
  return out;
}

bool operator==(const OpInstance& a, const OpInstance& b) {
  if (a.op != b.op) return false;
  auto ra = a.resolve();
  auto rb = b.resolve();
  if (ra && rb) return *ra == *rb;
  if (ra || rb) return false;
  return a.args == b.args;
}

// ---------------------------------------------------------------------------
// Block

Block::Block(std::string name, std::map<int, OpInstance> nodes, std::vector<Edge> edges)
    : name_(std::move(name)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (name_.empty()) throw Error("block name is empty");
  int inputs = 0;
  int outputs = 0;
  for (const auto& [idx, inst] : nodes_) {
    if (idx < 0) throw Error("negative node index " + std::to_string(idx));
    if (inst.op == "input") ++inputs;
    if (inst.op == "output") ++outputs;
  }
  if (inputs != 1) throw Error("block must have exactly one input node, has " + std::to_string(inputs));
  if (outputs != 1) throw Error("block must have exactly one output node, has " + std::to_string(outputs));
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (!nodes_.contains(e.src) || !nodes_.contains(e.dst)) {
      throw Error("edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) + " refers to a missing node");
    }
    if (i > 0 && edges_[i - 1] == e) {
      throw Error("duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst));
    }
  }
}

int Block::input_index() const {
  for (const auto& [idx, inst] : nodes_) {
    if (inst.op == "input") return idx;
  }
  throw Error("block has no input node");
}

int Block::output_index() const {
  for (const auto& [idx, inst] : nodes_) {
    if (inst.op == "output") return idx;
  }
  throw Error("block has no output node");
}

const OpInstance& Block::node(int index) const {
  auto it = nodes_.find(index);
  if (it == nodes_.end()) throw Error("no node " + std::to_string(index));
  return it->second;
}

std::vector<int> Block::predecessors(int index) const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (e.dst == index) out.push_back(e.src);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> Block::successors(int index) const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (e.src == index) out.push_back(e.dst);
  }
  return out;
}

Block Block::renamed(std::string name) const {
  Block b = *this;
  b.name_ = std::move(name);
  return b;
}

bool operator==(const Block& a, const Block& b) {
  return a.name_ == b.name_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
}

// ---------------------------------------------------------------------------
// Block text

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

int parse_index(std::string_view s, int line, std::string_view what) {
  s = trim(s);
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ParseError(line, "malformed " + std::string(what) + " '" + std::string(s) + "'");
  }
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, std::string(what) + " '" + std::string(s) + "' out of range");
  }
  return v;
}

// Splits on top-level commas.
std::vector<std::string_view> split_args(std::string_view s, int line) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    if (c == ')') {
      if (--depth < 0) throw ParseError(line, "unbalanced ')' in argument list");
    }
    if (c == ',' && depth == 0) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (depth != 0) throw ParseError(line, "unbalanced '(' in argument list");
  out.push_back(s.substr(start));
  return out;
}

OpInstance parse_op(std::string_view s, int line) {
  s = trim(s);
  std::size_t i = 0;
  if (s.empty() || !is_ident_start(s[0])) {
    throw ParseError(line, "malformed operation '" + std::string(s) + "'");
  }
  while (i < s.size() && is_ident_char(s[i])) ++i;
  OpInstance inst;
  inst.op = std::string(s.substr(0, i));
  std::string_view rest = trim(s.substr(i));
  if (rest.empty()) return inst;
  if (rest.front() != '(' || rest.back() != ')') {
    throw ParseError(line, "malformed operation '" + std::string(s) + "'");
  }
  std::string_view inner = trim(rest.substr(1, rest.size() - 2));
  if (inner.empty()) return inst;
  for (std::string_view raw : split_args(inner, line)) {
    std::string_view a = trim(raw);
    if (a.empty()) throw ParseError(line, "empty argument in '" + std::string(s) + "'");
    Arg arg;
    std::size_t eq = a.find('=');
    if (eq != std::string_view::npos) {
      std::string_view name = trim(a.substr(0, eq));
      if (name.empty() || !is_ident_start(name[0]) ||
          !std::all_of(name.begin(), name.end(), is_ident_char)) {
        throw ParseError(line, "malformed argument name '" + std::string(name) + "'");
      }
      arg.name = std::string(name);
      a = a.substr(eq + 1);
    }
    arg.value = ExprParser(a, line).parse();
    inst.args.push_back(std::move(arg));
  }
  return inst;
}

}  // namespace

Block parse_block(std::string_view text) {
  std::optional<std::string> name;
  std::map<int, OpInstance> nodes;
  std::map<int, int> node_line;
  std::vector<std::pair<Edge, int>> edges;
  int input_line = 0;
  int output_line = 0;
  int line_no = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::size_t comment = raw.find("//");
    if (comment != std::string_view::npos) raw = raw.substr(0, comment);
    std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.starts_with("##")) {
      if (name) throw ParseError(line_no, "unexpected second block header");
      if (line.size() < 5 || !line.ends_with("##")) {
        throw ParseError(line_no, "malformed header '" + std::string(line) + "'");
      }
      std::string_view n = trim(line.substr(2, line.size() - 4));
      if (n.empty() || n.find('#') != std::string_view::npos) {
        throw ParseError(line_no, "malformed header '" + std::string(line) + "'");
      }
      name = std::string(n);
      continue;
    }
    if (line.front() == '#') continue;
    if (!name) throw ParseError(line_no, "expected block header '##name##'");

    std::size_t arrow = line.find("->");
    if (arrow != std::string_view::npos) {
      Edge e{parse_index(line.substr(0, arrow), line_no, "edge"),
             parse_index(line.substr(arrow + 2), line_no, "edge")};
      for (const auto& [prev, prev_line] : edges) {
        if (prev == e) {
          throw ParseError(line_no, "duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                                        " (first on line " + std::to_string(prev_line) + ")");
        }
      }
      edges.emplace_back(e, line_no);
      continue;
    }
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(line_no, "expected 'index:operation' or 'src->dst', got '" + std::string(line) + "'");
    }
    int idx = parse_index(line.substr(0, colon), line_no, "node index");
    if (nodes.contains(idx)) throw ParseError(line_no, "duplicate index " + std::to_string(idx));
    OpInstance inst = parse_op(line.substr(colon + 1), line_no);
    if (inst.op == "input") {
      if (input_line) throw ParseError(line_no, "second input node (first on line " + std::to_string(input_line) + ")");
      input_line = line_no;
    }
    if (inst.op == "output") {
      if (output_line) {
        throw ParseError(line_no, "second output node (first on line " + std::to_string(output_line) + ")");
      }
      output_line = line_no;
    }
    nodes.emplace(idx, std::move(inst));
    node_line.emplace(idx, line_no);
  }

  if (!name) throw ParseError(std::max(line_no, 1), "expected block header '##name##'");
  for (const auto& [e, eline] : edges) {
    for (int end : {e.src, e.dst}) {
      if (!nodes.contains(end)) {
        throw ParseError(eline, "malformed edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                                    ": node " + std::to_string(end) + " is not defined");
      }
    }
  }
  if (!input_line) throw ParseError(line_no, "block has no input node");
  if (!output_line) throw ParseError(line_no, "block has no output node");

  std::vector<Edge> plain;
  plain.reserve(edges.size());
  for (const auto& [e, l] : edges) plain.push_back(e);
  return Block(std::move(*name), std::move(nodes), std::move(plain));
}

std::string print_block(const Block& block) {
  std::string out = "##" + block.name() + "##";
  for (const auto& [idx, inst] : block.nodes()) {
    out += '\n';
    out += std::to_string(idx);
    out += ':';
    out += inst.to_string();
  }
  for (const auto& e : block.edges()) {
    out += '\n';
    out += std::to_string(e.src);
    out += "->";
    out += std::to_string(e.dst);
  }
  return out;
}

}  // namespace nadkit::dsl
