#include "marglp/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace marglp {

namespace {

struct ConstExpr final : Expr {
  double v;
  explicit ConstExpr(double x) : v(x) {}
  double eval(const std::vector<double>&) const override { return v; }
  int max_axis() const override { return -1; }
};

struct VarExpr final : Expr {
  int axis;
  explicit VarExpr(int a) : axis(a) {}
  double eval(const std::vector<double>& pt) const override {
    if (axis >= static_cast<int>(pt.size()))
      throw ShapeError("expression references axis " + std::to_string(axis) +
                       " beyond grid dimension " + std::to_string(pt.size()));
    return pt[static_cast<size_t>(axis)];
  }
  int max_axis() const override { return axis; }
};

enum class BinOp { Add, Sub, Mul, Div };

struct BinExpr final : Expr {
  BinOp op;
  ExprPtr lhs, rhs;
  BinExpr(BinOp o, ExprPtr l, ExprPtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
  double eval(const std::vector<double>& pt) const override {
    const double a = lhs->eval(pt);
    const double b = rhs->eval(pt);
    switch (op) {
      case BinOp::Add: return a + b;
      case BinOp::Sub: return a - b;
      case BinOp::Mul: return a * b;
      default: return a / b;
    }
  }
  int max_axis() const override { return std::max(lhs->max_axis(), rhs->max_axis()); }
};

struct NegExpr final : Expr {
  ExprPtr arg;
  explicit NegExpr(ExprPtr a) : arg(std::move(a)) {}
  double eval(const std::vector<double>& pt) const override { return -arg->eval(pt); }
  int max_axis() const override { return arg->max_axis(); }
};

struct PowExpr final : Expr {
  ExprPtr base;
  double exponent;
  PowExpr(ExprPtr b, double e) : base(std::move(b)), exponent(e) {}
  double eval(const std::vector<double>& pt) const override {
    return std::pow(base->eval(pt), exponent);
  }
  int max_axis() const override { return base->max_axis(); }
};

enum class Fun { Exp, Abs };

struct FunExpr final : Expr {
  Fun fn;
  ExprPtr arg;
  FunExpr(Fun f, ExprPtr a) : fn(f), arg(std::move(a)) {}
  double eval(const std::vector<double>& pt) const override {
    const double a = arg->eval(pt);
    return fn == Fun::Exp ? std::exp(a) : std::abs(a);
  }
  int max_axis() const override { return arg->max_axis(); }
};

struct IndExpr final : Expr {
  int axis;
  double lo, hi;
  IndExpr(int a, double l, double h) : axis(a), lo(l), hi(h) {}
  double eval(const std::vector<double>& pt) const override {
    if (axis >= static_cast<int>(pt.size()))
      throw ShapeError("ind() references axis beyond grid dimension");
    const double v = pt[static_cast<size_t>(axis)];
    return (v >= lo && v < hi) ? 1.0 : 0.0;
  }
  int max_axis() const override { return axis; }
};

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  ExprPtr parse() {
    ExprPtr e = additive();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  ExprPtr additive() {
    ExprPtr e = multiplicative();
    for (;;) {
      skip_ws();
      if (accept('+'))
        e = std::make_unique<BinExpr>(BinOp::Add, std::move(e), multiplicative());
      else if (accept('-'))
        e = std::make_unique<BinExpr>(BinOp::Sub, std::move(e), multiplicative());
      else
        return e;
    }
  }

  ExprPtr multiplicative() {
    ExprPtr e = unary();
    for (;;) {
      skip_ws();
      if (accept('*'))
        e = std::make_unique<BinExpr>(BinOp::Mul, std::move(e), unary());
      else if (accept('/'))
        e = std::make_unique<BinExpr>(BinOp::Div, std::move(e), unary());
      else
        return e;
    }
  }

  ExprPtr unary() {
    skip_ws();
    if (accept('-')) return std::make_unique<NegExpr>(unary());
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    skip_ws();
    if (accept('^')) {
      skip_ws();
      bool neg = accept('-');
      const double e = number();
      return std::make_unique<PowExpr>(std::move(base), neg ? -e : e);
    }
    return base;
  }

  ExprPtr primary() {
    skip_ws();
    if (accept('(')) {
      ExprPtr e = additive();
      expect(')');
      return e;
    }
    if (pos_ < text_.size() && (std::isdigit(peek()) || peek() == '.'))
      return std::make_unique<ConstExpr>(number());
    if (pos_ < text_.size() && std::isalpha(peek())) {
      const std::string name = identifier();
      if (name == "exp" || name == "abs") {
        expect('(');
        ExprPtr arg = additive();
        expect(')');
        return std::make_unique<FunExpr>(name == "exp" ? Fun::Exp : Fun::Abs, std::move(arg));
      }
      if (name == "ind") {
        expect('(');
        skip_ws();
        const std::string var = identifier();
        const int axis = axis_of(var);
        expect(',');
        skip_ws();
        bool negl = accept('-');
        const double lo = number();
        expect(',');
        skip_ws();
        bool negh = accept('-');
        const double hi = number();
        expect(')');
        return std::make_unique<IndExpr>(axis, negl ? -lo : lo, negh ? -hi : hi);
      }
      return std::make_unique<VarExpr>(axis_of(name));
    }
    fail("expected a number, variable, or function");
    return nullptr;
  }

  int axis_of(const std::string& name) {
    if (name == "x") return 0;
    if (name == "y") return 1;
    if (name == "z") return 2;
    if (name == "t") return 3;
    if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '9')
      return name[1] - '1';
    fail("unknown variable '" + name + "'");
    return -1;
  }

  std::string identifier() {
    const size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(peek()) || peek() == '_')) ++pos_;
    if (pos_ == start) fail("expected an identifier");
    return text_.substr(start, pos_ - start);
  }

  double number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<size_t>(end - begin);
    return v;
  }

  char peek() const { return text_[pos_]; }
  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ConfigError("expression parse error at offset " + std::to_string(pos_) + ": " + msg +
                      " in \"" + text_ + "\"");
  }

  const std::string& text_;
  size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

ScalarField evaluate_on_grid(const Expr& e, const GridSpec& grid) {
  if (e.max_axis() >= grid.dim())
    throw ShapeError("expression references axis " + std::to_string(e.max_axis()) +
                     " but grid has " + std::to_string(grid.dim()) + " axes");
  return sample_field(grid, [&](const std::vector<double>& pt) { return e.eval(pt); });
}

Eigen::ArrayXd evaluate_on_axis(const Expr& e, const Axis& axis) {
  if (e.max_axis() > 0) throw ShapeError("axis factor expression may reference only x");
  Eigen::ArrayXd out(axis.count());
  std::vector<double> pt(1);
  for (Eigen::Index k = 0; k < axis.count(); ++k) {
    pt[0] = axis.nodes[k];
    out[k] = e.eval(pt);
  }
  return out;
}

}  // namespace marglp
