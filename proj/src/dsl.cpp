#include "stlmtl/dsl.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace stlmtl {

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                         message),
      line_(line),
      column_(column),
      detail_(message) {}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

enum class Tok { Number, Ident, LParen, RParen, LBracket, RBracket, Comma, Plus, Minus, Star, Slash, Caret,
                 Ge, Le, Gt, Lt, Arrow, End };

struct Token {
  Tok kind;
  std::string text;
  double value = 0.0;
  std::size_t offset = 0;
};

struct Failure {
  std::size_t offset;
  std::string message;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) { throw Failure{i, msg}; };
  while (i < s.size()) {
    const char c = s[i];
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.offset = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      double v = 0.0;
      auto res = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (res.ec != std::errc()) fail("malformed number");
      t.kind = Tok::Number;
      t.value = v;
      t.text = std::string(s.substr(i, static_cast<std::size_t>(res.ptr - (s.data() + i))));
      i = static_cast<std::size_t>(res.ptr - s.data());
      out.push_back(std::move(t));
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(s.substr(i, j - i));
      i = j;
      out.push_back(std::move(t));
      continue;
    }
    auto two = [&](char next) { return i + 1 < s.size() && s[i + 1] == next; };
    switch (c) {
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      case '[': t.kind = Tok::LBracket; break;
      case ']': t.kind = Tok::RBracket; break;
      case ',': t.kind = Tok::Comma; break;
      case '+': t.kind = Tok::Plus; break;
      case '-': t.kind = Tok::Minus; break;
      case '*': t.kind = Tok::Star; break;
      case '/': t.kind = Tok::Slash; break;
      case '^': t.kind = Tok::Caret; break;
      case '>': t.kind = two('=') ? Tok::Ge : Tok::Gt; break;
      case '<': t.kind = two('=') ? Tok::Le : Tok::Lt; break;
      case '=':
        if (!two('>')) fail("expected '=>'");
        t.kind = Tok::Arrow;
        break;
      default: fail(std::string("unexpected character '") + c + "'");
    }
    i += (t.kind == Tok::Ge || t.kind == Tok::Le || t.kind == Tok::Arrow) ? 2 : 1;
    out.push_back(std::move(t));
  }
  out.push_back(Token{Tok::End, "", 0.0, s.size()});
  return out;
}

// Polynomial of total degree <= 2 in n variables.
struct Poly {
  double c = 0.0;
  Eigen::VectorXd lin;
  Eigen::MatrixXd quad;
  int degree = 0;

  explicit Poly(int n, double constant = 0.0)
      : c(constant), lin(Eigen::VectorXd::Zero(n)), quad(Eigen::MatrixXd::Zero(n, n)) {}

  void update_degree() {
    degree = !quad.isZero(0.0) ? 2 : (!lin.isZero(0.0) ? 1 : 0);
  }
};

Poly operator+(Poly a, const Poly& b) {
  a.c += b.c;
  a.lin += b.lin;
  a.quad += b.quad;
  a.update_degree();
  return a;
}

Poly operator-(Poly a) {
  a.c = -a.c;
  a.lin = -a.lin;
  a.quad = -a.quad;
  return a;
}

Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

Poly scale(Poly a, double s) {
  a.c *= s;
  a.lin *= s;
  a.quad *= s;
  a.update_degree();
  return a;
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

  Formula run() {
    try {
      toks_ = tokenize(text_);
    } catch (const Failure& f) {
      raise(f);
    }
    try {
      Formula f = formula();
      if (peek().kind != Tok::End) fail("unexpected trailing input '" + peek().text + "'");
      return f;
    } catch (const Failure& f) {
      note(f);
      raise(furthest_);
    }
  }

 private:
  [[noreturn]] void raise(const Failure& f) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < f.offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(f.message, line, col);
  }

  void note(const Failure& f) {
    if (!have_failure_ || f.offset > furthest_.offset) {
      furthest_ = f;
      have_failure_ = true;
    }
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool is_word(const Token& t, std::string_view w) const { return t.kind == Tok::Ident && t.text == w; }

  [[noreturn]] void fail(const std::string& msg) const { throw Failure{peek().offset, msg}; }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    ++pos_;
  }

  double number(const char* what) {
    bool negative = false;
    if (peek().kind == Tok::Minus) {
      negative = true;
      ++pos_;
    }
    if (peek().kind != Tok::Number) fail(std::string("expected number for ") + what);
    const double v = toks_[pos_++].value;
    return negative ? -v : v;
  }

  TimeInterval interval() {
    expect(Tok::LBracket, "'['");
    const std::size_t at = peek().offset;
    const double a = number("interval start");
    expect(Tok::Comma, "','");
    const double b = number("interval end");
    expect(Tok::RBracket, "']'");
    if (a < 0.0) throw Failure{at, "interval start must be nonnegative"};
    if (a > b) throw Failure{at, "interval has a > b"};
    return TimeInterval(a, b);
  }

  Formula formula() {
    Formula lhs = disjunction();
    if (peek().kind == Tok::Arrow) {
      ++pos_;
      Formula rhs = formula();
      return Formula::implies(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula disjunction() {
    std::vector<Formula> args{conjunction()};
    while (is_word(peek(), "or")) {
      ++pos_;
      args.push_back(conjunction());
    }
    return Formula::disj(std::move(args));
  }

  Formula conjunction() {
    std::vector<Formula> args{until()};
    while (is_word(peek(), "and")) {
      ++pos_;
      args.push_back(until());
    }
    return Formula::conj(std::move(args));
  }

  Formula until() {
    Formula lhs = unary();
    if (is_word(peek(), "U") && peek(1).kind == Tok::LBracket) {
      ++pos_;
      TimeInterval iv = interval();
      Formula rhs = unary();
      return Formula::until(iv, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula unary() {
    const Token& t = peek();
    if (is_word(t, "not")) {
      ++pos_;
      return Formula::negate(unary());
    }
    if ((is_word(t, "G") || is_word(t, "F")) && peek(1).kind == Tok::LBracket) {
      const bool always = t.text == "G";
      ++pos_;
      TimeInterval iv = interval();
      Formula body = unary();
      return always ? Formula::always(iv, std::move(body)) : Formula::eventually(iv, std::move(body));
    }
    return primary();
  }

  Formula primary() {
    if (is_word(peek(), "true")) {
      ++pos_;
      return Formula::truth();
    }
    const std::size_t start = pos_;
    try {
      return comparison();
    } catch (const Failure& f) {
      note(f);
      pos_ = start;
    }
    if (peek().kind == Tok::LParen) {
      ++pos_;
      Formula inner = formula();
      expect(Tok::RParen, "')'");
      return inner;
    }
    fail("expected a formula");
  }

  static bool is_cmp(Tok k) { return k == Tok::Ge || k == Tok::Le || k == Tok::Gt || k == Tok::Lt; }

  Formula comparison() {
    std::vector<Poly> sides{expr()};
    std::vector<Tok> ops;
    while (is_cmp(peek().kind) && ops.size() < 2) {
      ops.push_back(toks_[pos_++].kind);
      sides.push_back(expr());
    }
    if (ops.empty()) fail("expected comparison operator");
    std::vector<Formula> preds;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const bool ge = ops[i] == Tok::Ge || ops[i] == Tok::Gt;
      Poly h = ge ? sides[i] - sides[i + 1] : sides[i + 1] - sides[i];
      preds.push_back(Formula::pred(Predicate(h.quad, h.lin, h.c)));
    }
    return Formula::conj(std::move(preds));
  }

  int n() const { return static_cast<int>(vars_.size()); }

  Poly expr() {
    Poly acc = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const bool plus = toks_[pos_++].kind == Tok::Plus;
      Poly rhs = term();
      acc = plus ? acc + rhs : acc - rhs;
    }
    return acc;
  }

  Poly term() {
    Poly acc = signed_factor();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Token op = toks_[pos_++];
      Poly rhs = signed_factor();
      if (op.kind == Tok::Star) {
        acc = multiply(acc, rhs, op.offset);
      } else {
        if (rhs.degree != 0) throw Failure{op.offset, "division by a non-constant expression"};
        if (rhs.c == 0.0) throw Failure{op.offset, "division by zero"};
        acc = scale(std::move(acc), 1.0 / rhs.c);
      }
    }
    return acc;
  }

  Poly signed_factor() {
    if (peek().kind == Tok::Minus) {
      ++pos_;
      return -signed_factor();
    }
    if (peek().kind == Tok::Plus) {
      ++pos_;
      return signed_factor();
    }
    return power();
  }

  Poly power() {
    Poly base = atom();
    if (peek().kind == Tok::Caret) {
      const std::size_t at = peek().offset;
      ++pos_;
      if (peek().kind != Tok::Number) fail("expected integer exponent");
      const double e = toks_[pos_++].value;
      if (e < 0 || e != std::floor(e)) throw Failure{at, "exponent must be a nonnegative integer"};
      if (base.degree == 0) return Poly(n(), std::pow(base.c, e));
      if (e > 2) throw Failure{at, "polynomial degree exceeds 2"};
      Poly out(n(), 1.0);
      for (int k = 0; k < static_cast<int>(e); ++k) out = multiply(out, base, at);
      return out;
    }
    return base;
  }

  Poly atom() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      ++pos_;
      return Poly(n(), t.value);
    }
    if (t.kind == Tok::Ident) {
      for (int i = 0; i < n(); ++i) {
        if (vars_[i] == t.text) {
          ++pos_;
          Poly p(n());
          p.lin[i] = 1.0;
          p.degree = 1;
          return p;
        }
      }
      fail("unknown identifier '" + t.text + "'");
    }
    if (t.kind == Tok::LParen) {
      ++pos_;
      Poly inner = expr();
      expect(Tok::RParen, "')'");
      return inner;
    }
    fail("expected an expression");
  }

  Poly multiply(const Poly& a, const Poly& b, std::size_t at) const {
    if (a.degree + b.degree > 2) throw Failure{at, "polynomial degree exceeds 2"};
    Poly out(n());
    out.c = a.c * b.c;
    out.lin = a.c * b.lin + b.c * a.lin;
    out.quad = a.c * b.quad + b.c * a.quad;
    if (a.degree == 1 && b.degree == 1) {
      const Eigen::MatrixXd outer = a.lin * b.lin.transpose();
      out.quad += 0.5 * (outer + outer.transpose());
    }
    out.update_degree();
    return out;
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Failure furthest_{0, "parse error"};
  bool have_failure_ = false;
};

void print_term(std::ostringstream& os, bool first, double coef, const std::string& monomial) {
  if (first) {
    if (coef == 1.0) {
      os << monomial;
    } else if (coef == -1.0) {
      os << '-' << monomial;
    } else {
      os << format_number(coef) << '*' << monomial;
    }
    return;
  }
  os << (coef < 0 ? " - " : " + ");
  const double mag = std::abs(coef);
  if (mag != 1.0) os << format_number(mag) << '*';
  os << monomial;
}

std::string print_predicate(const Predicate& p, const std::vector<std::string>& names) {
  const int n = p.dim();
  auto name = [&](int i) { return i < static_cast<int>(names.size()) ? names[i] : "x" + std::to_string(i + 1); };

  int nonzero_lin = 0, single = -1;
  for (int i = 0; i < n; ++i) {
    if (p.q()[i] != 0.0) {
      ++nonzero_lin;
      single = i;
    }
  }
  if (p.is_affine() && nonzero_lin == 1 && p.q()[single] == -1.0) {
    return name(single) + " <= " + format_number(p.r());
  }

  std::ostringstream os;
  bool first = true;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double coef = i == j ? p.P()(i, i) : 2.0 * p.P()(i, j);
      if (coef == 0.0) continue;
      print_term(os, first, coef, i == j ? name(i) + "^2" : name(i) + "*" + name(j));
      first = false;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (p.q()[i] == 0.0) continue;
    print_term(os, first, p.q()[i], name(i));
    first = false;
  }
  if (first) os << '0';
  os << " >= " << format_number(-p.r());
  return os.str();
}

std::string print_interval(const TimeInterval& iv) {
  return "[" + format_number(iv.a) + "," + format_number(iv.b) + "]";
}

std::string print(const Formula& f, const std::vector<std::string>& names) {
  auto wrap = [&](const Formula& c) { return "(" + print(c, names) + ")"; };
  switch (f.kind()) {
    case FormulaKind::True: return "true";
    case FormulaKind::Pred: return print_predicate(f.predicate(), names);
    case FormulaKind::Not: return "not " + wrap(f.child(0));
    case FormulaKind::And:
    case FormulaKind::Or: {
      const char* sep = f.kind() == FormulaKind::And ? " and " : " or ";
      std::string out;
      for (std::size_t i = 0; i < f.children().size(); ++i) {
        if (i) out += sep;
        out += wrap(f.child(i));
      }
      return out;
    }
    case FormulaKind::Until:
      return wrap(f.child(0)) + " U" + print_interval(f.interval()) + " " + wrap(f.child(1));
    case FormulaKind::Eventually: return "F" + print_interval(f.interval()) + wrap(f.child(0));
    case FormulaKind::Always: return "G" + print_interval(f.interval()) + wrap(f.child(0));
    case FormulaKind::Implies: return wrap(f.child(0)) + " => " + wrap(f.child(1));
  }
  return {};
}

}  // namespace

Formula parse(std::string_view text, const std::vector<std::string>& var_names) {
  return Parser(text, var_names).run();
}

std::string pretty_print(const Formula& f, const std::vector<std::string>& var_names) {
  return print(f, var_names);
}

}  // namespace stlmtl
