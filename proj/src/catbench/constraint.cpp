#include <algorithm>
#include <cctype>
#include <charconv>

#include "catbench/error.hpp"
#include "catbench/space.hpp"

namespace catbench::space {

namespace {

enum class Type { integer, boolean, label, permutation };

enum class Op {
  int_literal,
  bool_literal,
  label_literal,
  param,
  neg,
  logical_not,
  add,
  sub,
  mul,
  div,
  mod,
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  logical_and,
  logical_or,
  at,
  precedes,
};

[[noreturn]] void malformed(std::string_view source, const std::string &what) {
  throw Error(ErrorCode::malformed_space,
              "constraint '" + std::string(source) + "': " + what);
}

}  // namespace

struct ConstraintExpr::Node {
  Op op;
  Type type;
  std::int64_t integer = 0;
  std::string label;
  std::size_t param = 0;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const ConstraintExpr::Node>;

struct Token {
  enum Kind { end, integer, label, ident, symbol } kind = end;
  std::string text;
  std::int64_t value = 0;
};

class Parser {
 public:
  Parser(std::string_view source, const std::vector<ParameterDef> &params,
         std::vector<std::string> &referenced)
      : src_(source), params_(params), referenced_(referenced) {
    advance();
  }

  NodePtr parse() {
    auto root = parse_or();
    if (tok_.kind != Token::end) malformed(src_, "unexpected '" + tok_.text + "'");
    if (root->type != Type::boolean) malformed(src_, "expression is not boolean");
    return root;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_ = Token{};
    if (pos_ >= src_.size()) return;
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      tok_.kind = Token::integer;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      auto [p, ec] = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(),
                                     tok_.value);
      if (ec != std::errc{}) malformed(src_, "integer literal out of range");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      tok_.kind = Token::ident;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (c == '"') {
      std::size_t end = src_.find('"', pos_ + 1);
      if (end == std::string_view::npos) malformed(src_, "unterminated label");
      tok_.kind = Token::label;
      tok_.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return;
    }
    static constexpr std::string_view two_char[] = {"==", "!=", "<=", ">=", "&&", "||"};
    for (auto sym : two_char) {
      if (src_.substr(pos_, 2) == sym) {
        tok_.kind = Token::symbol;
        tok_.text = std::string(sym);
        pos_ += 2;
        return;
      }
    }
    if (std::string_view("+-*/%<>!(),").find(c) != std::string_view::npos) {
      tok_.kind = Token::symbol;
      tok_.text = std::string(1, c);
      ++pos_;
      return;
    }
    malformed(src_, std::string("unexpected character '") + c + "'");
  }

  bool accept(std::string_view sym) {
    if (tok_.kind == Token::symbol && tok_.text == sym) {
      advance();
      return true;
    }
    return false;
  }

  void expect(std::string_view sym) {
    if (!accept(sym)) malformed(src_, "expected '" + std::string(sym) + "'");
  }

  NodePtr make(Op op, Type type, std::vector<NodePtr> args) {
    auto n = std::make_shared<ConstraintExpr::Node>();
    n->op = op;
    n->type = type;
    n->args = std::move(args);
    return n;
  }

  void require(const NodePtr &n, Type t, const char *context) {
    if (n->type != t) malformed(src_, std::string("type mismatch in ") + context);
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("||")) {
      auto rhs = parse_and();
      require(lhs, Type::boolean, "'||'");
      require(rhs, Type::boolean, "'||'");
      lhs = make(Op::logical_or, Type::boolean, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_cmp();
    while (accept("&&")) {
      auto rhs = parse_cmp();
      require(lhs, Type::boolean, "'&&'");
      require(rhs, Type::boolean, "'&&'");
      lhs = make(Op::logical_and, Type::boolean, {lhs, rhs});
    }
    return lhs;
  }

  NodePtr parse_cmp() {
    auto lhs = parse_sum();
    static const std::pair<std::string_view, Op> ops[] = {
        {"==", Op::eq}, {"!=", Op::ne}, {"<=", Op::le},
        {">=", Op::ge}, {"<", Op::lt},  {">", Op::gt}};
    for (auto [sym, op] : ops) {
      if (accept(sym)) {
        auto rhs = parse_sum();
        if (lhs->type != rhs->type) malformed(src_, "comparison between different types");
        if (lhs->type == Type::permutation)
          malformed(src_, "permutations compare only through at() and precedes()");
        if ((lhs->type == Type::label || lhs->type == Type::boolean) && op != Op::eq &&
            op != Op::ne)
          malformed(src_, "only == and != apply to labels and booleans");
        check_label_domain(lhs, rhs);
        check_label_domain(rhs, lhs);
        return make(op, Type::boolean, {lhs, rhs});
      }
    }
    return lhs;
  }

  // "unroll == \"ture\"" is a typo, not an always-false constraint.
  void check_label_domain(const NodePtr &maybe_param, const NodePtr &maybe_literal) {
    if (maybe_param->op != Op::param || maybe_literal->op != Op::label_literal) return;
    const auto &labels = params_[maybe_param->param].labels;
    if (std::find(labels.begin(), labels.end(), maybe_literal->label) == labels.end())
      malformed(src_, "label \"" + maybe_literal->label + "\" is not in the domain of " +
                          params_[maybe_param->param].name);
  }

  NodePtr parse_sum() {
    auto lhs = parse_prod();
    for (;;) {
      Op op;
      if (accept("+")) op = Op::add;
      else if (accept("-")) op = Op::sub;
      else return lhs;
      auto rhs = parse_prod();
      require(lhs, Type::integer, "arithmetic");
      require(rhs, Type::integer, "arithmetic");
      lhs = make(op, Type::integer, {lhs, rhs});
    }
  }

  NodePtr parse_prod() {
    auto lhs = parse_unary();
    for (;;) {
      Op op;
      if (accept("*")) op = Op::mul;
      else if (accept("/")) op = Op::div;
      else if (accept("%")) op = Op::mod;
      else return lhs;
      auto rhs = parse_unary();
      require(lhs, Type::integer, "arithmetic");
      require(rhs, Type::integer, "arithmetic");
      lhs = make(op, Type::integer, {lhs, rhs});
    }
  }

  NodePtr parse_unary() {
    if (accept("!")) {
      auto arg = parse_unary();
      require(arg, Type::boolean, "'!'");
      return make(Op::logical_not, Type::boolean, {arg});
    }
    if (accept("-")) {
      auto arg = parse_unary();
      require(arg, Type::integer, "unary '-'");
      return make(Op::neg, Type::integer, {arg});
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    if (tok_.kind == Token::integer) {
      auto n = std::make_shared<ConstraintExpr::Node>();
      n->op = Op::int_literal;
      n->type = Type::integer;
      n->integer = tok_.value;
      advance();
      return n;
    }
    if (tok_.kind == Token::label) {
      auto n = std::make_shared<ConstraintExpr::Node>();
      n->op = Op::label_literal;
      n->type = Type::label;
      n->label = tok_.text;
      advance();
      return n;
    }
    if (accept("(")) {
      auto inner = parse_or();
      expect(")");
      return inner;
    }
    if (tok_.kind != Token::ident) {
      malformed(src_, tok_.kind == Token::end ? "unexpected end of expression"
                                              : "unexpected '" + tok_.text + "'");
    }
    std::string name = tok_.text;
    advance();
    if (name == "true" || name == "false") {
      auto n = std::make_shared<ConstraintExpr::Node>();
      n->op = Op::bool_literal;
      n->type = Type::boolean;
      n->integer = name == "true";
      return n;
    }
    if (accept("(")) return parse_call(name);
    return param_ref(name);
  }

  NodePtr param_ref(const std::string &name) {
    auto it = std::find_if(params_.begin(), params_.end(),
                           [&](const ParameterDef &p) { return p.name == name; });
    if (it == params_.end()) malformed(src_, "unknown parameter '" + name + "'");
    if (std::find(referenced_.begin(), referenced_.end(), name) == referenced_.end())
      referenced_.push_back(name);
    auto n = std::make_shared<ConstraintExpr::Node>();
    n->op = Op::param;
    n->param = static_cast<std::size_t>(it - params_.begin());
    switch (it->kind) {
      case ParamKind::ordinal: n->type = Type::integer; break;
      case ParamKind::categorical: n->type = Type::label; break;
      case ParamKind::permutation: n->type = Type::permutation; break;
    }
    return n;
  }

  NodePtr parse_call(const std::string &fn) {
    std::vector<NodePtr> args;
    if (!accept(")")) {
      do {
        args.push_back(parse_or());
      } while (accept(","));
      expect(")");
    }
    if (fn == "at") {
      if (args.size() != 2) malformed(src_, "at() takes (permutation, index)");
      require(args[0], Type::permutation, "at()");
      require(args[1], Type::integer, "at()");
      return make(Op::at, Type::integer, std::move(args));
    }
    if (fn == "precedes") {
      if (args.size() != 3) malformed(src_, "precedes() takes (permutation, a, b)");
      require(args[0], Type::permutation, "precedes()");
      require(args[1], Type::integer, "precedes()");
      require(args[2], Type::integer, "precedes()");
      return make(Op::precedes, Type::boolean, std::move(args));
    }
    malformed(src_, "unknown function '" + fn + "'");
  }

  std::string_view src_;
  const std::vector<ParameterDef> &params_;
  std::vector<std::string> &referenced_;
  std::size_t pos_ = 0;
  Token tok_;
};

struct Evaluator {
  const Configuration &config;

  std::int64_t integer(const ConstraintExpr::Node &n) const {
    switch (n.op) {
      case Op::int_literal: return n.integer;
      case Op::param: return std::get<std::int64_t>(config.values[n.param]);
      case Op::neg: return -integer(*n.args[0]);
      case Op::add: return integer(*n.args[0]) + integer(*n.args[1]);
      case Op::sub: return integer(*n.args[0]) - integer(*n.args[1]);
      case Op::mul: return integer(*n.args[0]) * integer(*n.args[1]);
      case Op::div: {
        const auto d = integer(*n.args[1]);
        return d == 0 ? 0 : integer(*n.args[0]) / d;
      }
      case Op::mod: {
        const auto a = integer(*n.args[0]);
        const auto d = integer(*n.args[1]);
        return d == 0 ? a : a % d;
      }
      case Op::at: {
        const auto &p = std::get<Permutation>(config.values[n.args[0]->param]);
        const auto i = integer(*n.args[1]);
        return i < 0 || i >= static_cast<std::int64_t>(p.size()) ? -1 : p[i];
      }
      default: break;
    }
    throw Error(ErrorCode::internal, "constraint node is not an integer");
  }

  const std::string &label(const ConstraintExpr::Node &n) const {
    if (n.op == Op::label_literal) return n.label;
    return std::get<std::string>(config.values[n.param]);
  }

  bool boolean(const ConstraintExpr::Node &n) const {
    switch (n.op) {
      case Op::bool_literal: return n.integer != 0;
      case Op::logical_not: return !boolean(*n.args[0]);
      case Op::logical_and: return boolean(*n.args[0]) && boolean(*n.args[1]);
      case Op::logical_or: return boolean(*n.args[0]) || boolean(*n.args[1]);
      case Op::precedes: {
        const auto &p = std::get<Permutation>(config.values[n.args[0]->param]);
        const auto a = integer(*n.args[1]);
        const auto b = integer(*n.args[2]);
        auto ia = std::find(p.begin(), p.end(), a);
        auto ib = std::find(p.begin(), p.end(), b);
        return ia != p.end() && ib != p.end() && ia < ib;
      }
      case Op::eq:
      case Op::ne: {
        const auto &l = *n.args[0];
        const auto &r = *n.args[1];
        bool equal = false;
        switch (l.type) {
          case Type::integer: equal = integer(l) == integer(r); break;
          case Type::label: equal = label(l) == label(r); break;
          case Type::boolean: equal = boolean(l) == boolean(r); break;
          case Type::permutation: break;
        }
        return n.op == Op::eq ? equal : !equal;
      }
      case Op::lt: return integer(*n.args[0]) < integer(*n.args[1]);
      case Op::le: return integer(*n.args[0]) <= integer(*n.args[1]);
      case Op::gt: return integer(*n.args[0]) > integer(*n.args[1]);
      case Op::ge: return integer(*n.args[0]) >= integer(*n.args[1]);
      default: break;
    }
    throw Error(ErrorCode::internal, "constraint node is not boolean");
  }
};

}  // namespace

ConstraintExpr ConstraintExpr::parse(std::string_view source,
                                     const std::vector<ParameterDef> &params) {
  ConstraintExpr expr;
  expr.source_ = std::string(source);
  Parser parser(expr.source_, params, expr.referenced_);
  expr.root_ = parser.parse();
  return expr;
}

bool ConstraintExpr::evaluate(const Configuration &config) const {
  return Evaluator{config}.boolean(*root_);
}

}  // namespace catbench::space
