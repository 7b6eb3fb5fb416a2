#include "ahx/expr.hpp"

#include <cctype>
#include <charconv>

namespace ahx {

struct Expression::Node {
  enum class Kind { number, variable, neg, add, sub, mul, div, pow, call };
  enum class Fn { sin, cos, tan, exp, log, sqrt, sinh, cosh, tanh, abs };
  Kind kind = Kind::number;
  double value = 0.0;
  int slot = 0;
  Fn fn = Fn::sin;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::number;
  n->value = v;
  return n;
}

NodePtr make_binary(Node::Kind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("expression '" + std::string(s_) + "': " + what + " at position " +
                          std::to_string(pos_));
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

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(Node::Kind::add, lhs, term());
      else if (accept('-'))
        lhs = make_binary(Node::Kind::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(Node::Kind::mul, lhs, unary());
      else if (accept('/'))
        lhs = make_binary(Node::Kind::div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::neg;
      n->lhs = unary();
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_binary(Node::Kind::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    double v = 0.0;
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return make_number(v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string id(s_.substr(start, pos_ - start));
    if (accept('(')) {
      static const std::pair<const char*, Node::Fn> table[] = {
          {"sin", Node::Fn::sin},   {"cos", Node::Fn::cos},   {"tan", Node::Fn::tan},
          {"exp", Node::Fn::exp},   {"log", Node::Fn::log},   {"sqrt", Node::Fn::sqrt},
          {"sinh", Node::Fn::sinh}, {"cosh", Node::Fn::cosh}, {"tanh", Node::Fn::tanh},
          {"abs", Node::Fn::abs}};
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::call;
      bool found = false;
      for (const auto& [fname, fn] : table) {
        if (id == fname) {
          n->fn = fn;
          found = true;
        }
      }
      if (!found) fail("unknown function '" + id + "'");
      n->lhs = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (id == "pi") return make_number(kPi);
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::variable;
    if (id == "rho") {
      n->slot = 0;
    } else if (id == "y") {
      n->slot = 1;
    } else if (id.size() == 2 && id[0] == 'y' && id[1] >= '1' && id[1] <= '9') {
      n->slot = id[1] - '0';
    } else {
      fail("unknown variable '" + id + "'");
    }
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

template <class S>
S eval_node(const Node& n, std::span<const S> vars) {
  using std::abs, std::cos, std::cosh, std::exp, std::log, std::pow, std::sin, std::sinh,
      std::sqrt, std::tan, std::tanh;
  switch (n.kind) {
    case Node::Kind::number:
      return S(n.value);
    case Node::Kind::variable:
      if (static_cast<std::size_t>(n.slot) >= vars.size())
        throw InvalidArgument("expression references variable slot " + std::to_string(n.slot) +
                              " beyond the chart dimension");
      return vars[n.slot];
    case Node::Kind::neg:
      return -eval_node(*n.lhs, vars);
    case Node::Kind::add:
      return eval_node(*n.lhs, vars) + eval_node(*n.rhs, vars);
    case Node::Kind::sub:
      return eval_node(*n.lhs, vars) - eval_node(*n.rhs, vars);
    case Node::Kind::mul:
      return eval_node(*n.lhs, vars) * eval_node(*n.rhs, vars);
    case Node::Kind::div:
      return eval_node(*n.lhs, vars) / eval_node(*n.rhs, vars);
    case Node::Kind::pow: {
      // Integer exponents are expanded so that negative bases work.
      if (n.rhs->kind == Node::Kind::number && n.rhs->value == std::round(n.rhs->value) &&
          std::abs(n.rhs->value) <= 16) {
        const S base = eval_node(*n.lhs, vars);
        const int k = static_cast<int>(std::abs(n.rhs->value));
        S acc(1.0);
        for (int i = 0; i < k; ++i) acc = acc * base;
        return n.rhs->value < 0 ? S(1.0) / acc : acc;
      }
      return pow(eval_node(*n.lhs, vars), eval_node(*n.rhs, vars));
    }
    case Node::Kind::call: {
      const S a = eval_node(*n.lhs, vars);
      switch (n.fn) {
        case Node::Fn::sin: return sin(a);
        case Node::Fn::cos: return cos(a);
        case Node::Fn::tan: return tan(a);
        case Node::Fn::exp: return exp(a);
        case Node::Fn::log: return log(a);
        case Node::Fn::sqrt: return sqrt(a);
        case Node::Fn::sinh: return sinh(a);
        case Node::Fn::cosh: return cosh(a);
        case Node::Fn::tanh: return tanh(a);
        case Node::Fn::abs: return abs(a);
      }
    }
  }
  return S(0.0);
}

int max_slot_of(const Node& n) {
  int m = n.kind == Node::Kind::variable ? n.slot : -1;
  if (n.lhs) m = std::max(m, max_slot_of(*n.lhs));
  if (n.rhs) m = std::max(m, max_slot_of(*n.rhs));
  return m;
}

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = std::string(text);
  return e;
}

Expression Expression::constant(double value) {
  Expression e;
  e.root_ = make_number(value);
  e.text_ = std::to_string(value);
  return e;
}

double Expression::eval(std::span<const double> vars) const { return eval_node(*root_, vars); }

Dual Expression::eval(std::span<const Dual> vars) const { return eval_node(*root_, vars); }

int Expression::max_slot() const { return max_slot_of(*root_); }

}  // namespace ahx
