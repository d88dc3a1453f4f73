#pragma once

// Problem files: a line-oriented format with s-expression function bodies.
//
//   # comment
//   name  unit square
//   dim   2
//   expr  (sum 1 (max (abs 0) (abs 1)) 1 (const -1))
//   family finite [(abs 0), (abs 1)]
//   family interval 0 1.5707963267948966 33 (affine [(cos t), (sin t)] -1)
//   slater [0, 0]
//   point  [1, 0]
//   box    -3..3 -3..3
//   tau    0.5
//
// Expressions: (const c) (affine [a] b) (norm) (abs i) (exp1d i s) (possq i)
// (max e...) (sum w e ...) (compose [[row]...] [c] e). Inside an interval
// template any number may be t, pi, or (cos n) (sin n) (+ n...) (* n...) (- n...).

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ebstab/convex_expr.hpp"
#include "ebstab/error.hpp"
#include "ebstab/semi_infinite.hpp"
#include "ebstab/types.hpp"

namespace ebstab {

struct ProblemFile {
  std::string name;
  Eigen::Index dim = 0;
  std::optional<ConvexExpr> expr;
  std::optional<IndexedFamily> family;
  std::optional<Vector> slater;
  std::optional<Vector> point;
  std::optional<Box> box;
  std::optional<double> tau;

  /// The constraint function: the expression, or the sup of the family.
  ConvexExpr function() const { return expr ? *expr : family->materialize(); }
};

namespace detail {

struct Token {
  enum Kind { Open, Close, LBrack, RBrack, Comma, Atom, Newline, End } kind;
  std::string text;
  int line = 1;
  int col = 1;
  std::size_t offset = 0;
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  int depth = 0;
  std::size_t i = 0;
  auto push = [&](Token::Kind k, std::string text, int l, int c, std::size_t off) {
    out.push_back(Token{k, std::move(text), l, c, off});
  };
  while (i < src.size()) {
    const char ch = src[i];
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (ch == '\n') {
      if (depth == 0) push(Token::Newline, "", line, col, i);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++i;
      ++col;
      continue;
    }
    const int c0 = col;
    const std::size_t o0 = i;
    switch (ch) {
      case '(': ++depth; push(Token::Open, "(", line, c0, o0); break;
      case ')': --depth; push(Token::Close, ")", line, c0, o0); break;
      case '[': ++depth; push(Token::LBrack, "[", line, c0, o0); break;
      case ']': --depth; push(Token::RBrack, "]", line, c0, o0); break;
      case ',': push(Token::Comma, ",", line, c0, o0); break;
      default: {
        std::size_t j = i;
        while (j < src.size() && std::string_view(" \t\r\n()[],#").find(src[j]) == std::string_view::npos) ++j;
        push(Token::Atom, std::string(src.substr(i, j - i)), line, c0, o0);
        col += static_cast<int>(j - i);
        i = j;
        continue;
      }
    }
    ++i;
    ++col;
  }
  push(Token::End, "", line, col, src.size());
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class Parser {
 public:
  Parser(std::string_view src, std::optional<double> t = std::nullopt) : src_(src), toks_(tokenize(src)), t_(t) {}

  [[noreturn]] void fail(ErrorCode code, const Token& at, const std::string& what) const {
    throw ParseError(code, at.line, at.col, what);
  }
  [[noreturn]] void fail(const Token& at, const std::string& what) const { fail(ErrorCode::Syntax, at, what); }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at(Token::Kind k) const { return peek().kind == k; }

  const Token& expect(Token::Kind k, const char* what) {
    if (!at(k)) fail(peek(), std::string("expected ") + what);
    return next();
  }

  double number() {
    const Token& tok = peek();
    if (tok.kind == Token::Atom) {
      next();
      if (tok.text == "t") {
        if (!t_) fail(tok, "parameter t used outside an interval template");
        return *t_;
      }
      if (tok.text == "pi") return std::acos(-1.0);
      auto v = parse_double(tok.text);
      if (!v) fail(tok, "expected a number, got '" + tok.text + "'");
      return *v;
    }
    if (tok.kind == Token::Open) {
      next();
      const Token& head = expect(Token::Atom, "number operator");
      std::vector<double> args;
      while (!at(Token::Close)) {
        if (at(Token::End)) fail(peek(), "unterminated number expression");
        args.push_back(number());
      }
      next();
      const std::string& op = head.text;
      if ((op == "cos" || op == "sin") && args.size() == 1) return op == "cos" ? std::cos(args[0]) : std::sin(args[0]);
      if (op == "+" && !args.empty()) {
        double s = 0.0;
        for (double a : args) s += a;
        return s;
      }
      if (op == "*" && !args.empty()) {
        double s = 1.0;
        for (double a : args) s *= a;
        return s;
      }
      if (op == "-" && args.size() == 1) return -args[0];
      if (op == "-" && args.size() == 2) return args[0] - args[1];
      fail(head, "unknown number operator '" + op + "' with " + std::to_string(args.size()) + " arguments");
    }
    fail(tok, "expected a number");
  }

  Eigen::Index index(Eigen::Index m) {
    const Token& tok = peek();
    const double v = number();
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(m)) {
      fail(ErrorCode::DimensionMismatch, tok, "coordinate index out of range for dimension " + std::to_string(m));
    }
    return static_cast<Eigen::Index>(v);
  }

  std::vector<double> list() {
    expect(Token::LBrack, "'['");
    std::vector<double> v;
    while (!at(Token::RBrack)) {
      if (at(Token::End)) fail(peek(), "unterminated vector");
      v.push_back(number());
      if (at(Token::Comma)) next();
    }
    next();
    return v;
  }

  Vector vector(Eigen::Index m) {
    const Token& tok = peek();
    const auto v = list();
    if (m >= 0 && static_cast<Eigen::Index>(v.size()) != m) {
      fail(ErrorCode::DimensionMismatch, tok,
           "expected " + std::to_string(m) + " entries, got " + std::to_string(v.size()));
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Matrix matrix(Eigen::Index cols) {
    const Token& tok = expect(Token::LBrack, "'['");
    std::vector<Vector> rows;
    while (!at(Token::RBrack)) {
      if (at(Token::End)) fail(peek(), "unterminated matrix");
      rows.push_back(vector(cols));
      if (at(Token::Comma)) next();
    }
    next();
    if (rows.empty()) fail(tok, "matrix needs at least one row");
    Matrix a(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) a.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return a;
  }

  bool at_terminator(bool bare) const {
    return bare ? (at(Token::Comma) || at(Token::RBrack)) : at(Token::Close);
  }

  // Body of an expression after its opening parenthesis (or bare head).
  ConvexExpr body(Eigen::Index m, bool bare) {
    const Token& head = expect(Token::Atom, "expression head");
    const std::string& h = head.text;
    try {
      ConvexExpr e = [&]() -> ConvexExpr {
        if (h == "const") return ConvexExpr::constant(m, number());
        if (h == "affine") {
          Vector a = vector(m);
          const double b = number();
          return ConvexExpr::affine(std::move(a), b);
        }
        if (h == "norm") return ConvexExpr::euclid_norm(m);
        if (h == "abs") return ConvexExpr::abs_coord(m, index(m));
        if (h == "possq") return ConvexExpr::pos_part_square(m, index(m));
        if (h == "exp1d") {
          const Eigen::Index i = index(m);
          return ConvexExpr::exp1d(m, i, number());
        }
        if (h == "max") {
          std::vector<ConvexExpr> kids;
          while (!at_terminator(bare)) kids.push_back(expr(m));
          if (kids.empty()) fail(head, "max needs at least one argument");
          return ConvexExpr::max(std::move(kids));
        }
        if (h == "sum") {
          std::vector<std::pair<double, ConvexExpr>> terms;
          while (!at_terminator(bare)) {
            const double w = number();
            terms.emplace_back(w, expr(m));
          }
          if (terms.empty()) fail(head, "sum needs at least one term");
          return ConvexExpr::sum(std::move(terms));
        }
        if (h == "compose") {
          Matrix a = matrix(m);
          const Eigen::Index rows = a.rows();
          Vector c = vector(rows);
          ConvexExpr inner = expr(rows);
          return ConvexExpr::compose_affine(std::move(inner), std::move(a), std::move(c));
        }
        fail(head, "unknown expression '" + h + "'");
      }();
      if (!at_terminator(bare)) fail(peek(), "unexpected argument to '" + h + "'");
      return e;
    } catch (const ParseError&) {
      throw;
    } catch (const Error& err) {
      std::string msg = err.what();
      const std::string prefix = std::string(to_string(err.code())) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      fail(err.code(), head, msg);
    }
  }

  ConvexExpr expr(Eigen::Index m) {
    expect(Token::Open, "'('");
    ConvexExpr e = body(m, false);
    expect(Token::Close, "')'");
    return e;
  }

  // A family item: parenthesized or bare ("abs 0").
  ConvexExpr item(Eigen::Index m) {
    if (at(Token::Open)) return expr(m);
    return body(m, true);
  }

  std::string_view source_between(std::size_t from, std::size_t to) const { return src_.substr(from, to - from); }

  std::size_t pos_ = 0;
  std::string_view src_;
  std::vector<Token> toks_;
  std::optional<double> t_;
};

inline std::string one_line(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

inline ConvexExpr instantiate_template(const std::string& text, Eigen::Index m, double t) {
  Parser p(text, t);
  ConvexExpr e = p.expr(m);
  if (!p.at(Token::End)) p.fail(p.peek(), "trailing text after template");
  return e;
}

}  // namespace detail

/// Parses and validates a problem file.
inline ProblemFile parse_problem(std::string_view text) {
  using detail::Token;
  detail::Parser p(text);
  ProblemFile pf;
  std::optional<Token> slater_at;
  std::optional<Token> box_at;
  std::vector<std::pair<double, double>> ranges;
  while (!p.at(Token::End)) {
    if (p.at(Token::Newline)) {
      p.next();
      continue;
    }
    const Token kw = p.expect(Token::Atom, "a keyword");
    auto need_dim = [&]() {
      if (pf.dim == 0) p.fail(kw, "'dim' must come before '" + kw.text + "'");
    };
    if (kw.text == "name") {
      std::string name;
      while (!p.at(Token::Newline) && !p.at(Token::End)) {
        const Token& t = p.next();
        if (!name.empty() && t.kind == Token::Atom) name += ' ';
        name += t.text;
      }
      pf.name = name;
    } else if (kw.text == "dim") {
      const Token& tok = p.peek();
      const double m = p.number();
      if (m < 1 || m != std::floor(m) || m > 64) p.fail(tok, "dimension must be an integer in 1..64");
      pf.dim = static_cast<Eigen::Index>(m);
    } else if (kw.text == "expr") {
      need_dim();
      if (pf.expr || pf.family) p.fail(kw, "only one 'expr' or 'family' line is allowed");
      pf.expr = p.expr(pf.dim);
    } else if (kw.text == "family") {
      need_dim();
      if (pf.expr || pf.family) p.fail(kw, "only one 'expr' or 'family' line is allowed");
      const Token kind = p.expect(Token::Atom, "'finite' or 'interval'");
      if (kind.text == "finite") {
        p.expect(Token::LBrack, "'['");
        std::vector<ConvexExpr> members;
        while (!p.at(Token::RBrack)) {
          if (p.at(Token::End)) p.fail(p.peek(), "unterminated family list");
          members.push_back(p.item(pf.dim));
          if (p.at(Token::Comma)) p.next();
        }
        p.next();
        if (members.empty()) p.fail(kind, "finite family needs at least one member");
        pf.family = IndexedFamily::finite(std::move(members));
      } else if (kind.text == "interval") {
        const double a = p.number();
        const Token& btok = p.peek();
        const double b = p.number();
        if (!(a < b)) p.fail(btok, "interval needs a < b");
        const Token& ntok = p.peek();
        const double n = p.number();
        if (n < 2 || n != std::floor(n)) p.fail(ntok, "grid count must be an integer >= 2");
        const std::size_t start = p.peek().offset;
        if (!p.at(Token::Open)) p.fail(p.peek(), "expected a template expression");
        // validate the template at both ends of the interval
        int depth = 0;
        std::size_t end = start;
        do {
          const Token& t = p.next();
          if (t.kind == Token::Open) ++depth;
          if (t.kind == Token::Close) --depth;
          if (t.kind == Token::End) p.fail(t, "unterminated template");
          end = t.offset + t.text.size();
        } while (depth > 0);
        const std::string tmpl = detail::one_line(p.source_between(start, end));
        const Eigen::Index m = pf.dim;
        for (double t : {a, b}) {
          try {
            detail::instantiate_template(tmpl, m, t);
          } catch (const ParseError& e) {
            throw ParseError(e.code(), kind.line, kind.col,
                             "in template at t=" + format_number(t) + ": " + e.what());
          }
        }
        pf.family = IndexedFamily::interval(
            a, b, static_cast<std::size_t>(n), [tmpl, m](double t) { return detail::instantiate_template(tmpl, m, t); },
            tmpl);
      } else {
        p.fail(kind, "unknown family kind '" + kind.text + "'");
      }
    } else if (kw.text == "slater" || kw.text == "point") {
      need_dim();
      (kw.text == "slater" ? pf.slater : pf.point) = p.vector(pf.dim);
      if (kw.text == "slater") slater_at = kw;
    } else if (kw.text == "box") {
      need_dim();
      box_at = kw;
      ranges.clear();
      while (!p.at(Token::Newline) && !p.at(Token::End)) {
        const Token& tok = p.expect(Token::Atom, "a range lo..hi");
        const auto sep = tok.text.find("..", 1);
        if (sep == std::string::npos) p.fail(tok, "expected a range lo..hi");
        auto lo = detail::parse_double(std::string_view(tok.text).substr(0, sep));
        auto hi = detail::parse_double(std::string_view(tok.text).substr(sep + 2));
        if (!lo || !hi || !(*lo < *hi)) p.fail(tok, "malformed range '" + tok.text + "'");
        ranges.emplace_back(*lo, *hi);
      }
      if (ranges.size() != 1 && static_cast<Eigen::Index>(ranges.size()) != pf.dim) {
        p.fail(ErrorCode::DimensionMismatch, kw, "box needs one range or one per axis");
      }
      Box box{Vector(pf.dim), Vector(pf.dim)};
      for (Eigen::Index i = 0; i < pf.dim; ++i) {
        const auto& r = ranges[ranges.size() == 1 ? 0 : static_cast<std::size_t>(i)];
        box.lo[i] = r.first;
        box.hi[i] = r.second;
      }
      pf.box = box;
    } else if (kw.text == "tau") {
      const Token& tok = p.peek();
      pf.tau = p.number();
      if (!(*pf.tau > 0.0)) p.fail(tok, "tau must be positive");
    } else {
      p.fail(kw, "unknown keyword '" + kw.text + "'");
    }
    if (!p.at(Token::Newline) && !p.at(Token::End)) p.fail(p.peek(), "unexpected text after '" + kw.text + "'");
  }
  if (pf.dim == 0) throw ParseError(ErrorCode::Syntax, 1, 1, "missing 'dim'");
  if (!pf.expr && !pf.family) throw ParseError(ErrorCode::Syntax, 1, 1, "missing 'expr' or 'family'");
  if (pf.slater && !(eval(pf.function(), *pf.slater) < 0.0)) {
    throw ParseError(ErrorCode::InfeasibleSlater, slater_at->line, slater_at->col,
                     "declared slater point does not satisfy f < 0");
  }
  return pf;
}

inline std::string serialize_expr(const ConvexExpr& f) {
  switch (f.kind()) {
    case ExprKind::Const: return "(const " + format_number(f.constant_value()) + ")";
    case ExprKind::Affine: return "(affine " + format_vector(f.coefficients()) + " " + format_number(f.offset()) + ")";
    case ExprKind::EuclidNorm: return "(norm)";
    case ExprKind::AbsCoord: return "(abs " + std::to_string(f.coord()) + ")";
    case ExprKind::PosPartSquare: return "(possq " + std::to_string(f.coord()) + ")";
    case ExprKind::Exp1D: return "(exp1d " + std::to_string(f.coord()) + " " + format_number(f.shift()) + ")";
    case ExprKind::Max: {
      std::string s = "(max";
      for (const auto& c : f.children()) s += " " + serialize_expr(c);
      return s + ")";
    }
    case ExprKind::Sum: {
      std::string s = "(sum";
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        s += " " + format_number(f.weights()[k]) + " " + serialize_expr(f.children()[k]);
      }
      return s + ")";
    }
    case ExprKind::ComposeAffine: {
      std::string s = "(compose [";
      for (Eigen::Index r = 0; r < f.matrix().rows(); ++r) {
        if (r > 0) s += ", ";
        s += format_vector(f.matrix().row(r).transpose());
      }
      return s + "] " + format_vector(f.translation()) + " " + serialize_expr(f.inner()) + ")";
    }
  }
  return "";
}

inline std::string serialize_problem(const ProblemFile& p) {
  std::string s;
  if (!p.name.empty()) s += "name " + p.name + "\n";
  s += "dim " + std::to_string(p.dim) + "\n";
  if (p.expr) s += "expr " + serialize_expr(*p.expr) + "\n";
  if (p.family) {
    const IndexedFamily& f = *p.family;
    if (f.kind() == IndexKind::Finite) {
      s += "family finite [";
      for (std::size_t i = 0; i < f.members().size(); ++i) {
        if (i > 0) s += ", ";
        s += serialize_expr(f.members()[i]);
      }
      s += "]\n";
    } else {
      if (f.template_text().empty()) throw Error(ErrorCode::Precondition, "interval family has no template text");
      s += "family interval " + format_number(f.lower()) + " " + format_number(f.upper()) + " " +
           std::to_string(f.grid_count()) + " " + f.template_text() + "\n";
    }
  }
  if (p.slater) s += "slater " + format_vector(*p.slater) + "\n";
  if (p.point) s += "point " + format_vector(*p.point) + "\n";
  if (p.box) {
    s += "box";
    for (Eigen::Index i = 0; i < p.box->dim(); ++i) {
      s += " " + format_number(p.box->lo[i]) + ".." + format_number(p.box->hi[i]);
    }
    s += "\n";
  }
  if (p.tau) s += "tau " + format_number(*p.tau) + "\n";
  return s;
}

inline bool same_family(const IndexedFamily& a, const IndexedFamily& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim()) return false;
  if (a.kind() == IndexKind::Finite) return a.members() == b.members() && a.labels() == b.labels();
  return a.lower() == b.lower() && a.upper() == b.upper() && a.grid_count() == b.grid_count() &&
         a.template_text() == b.template_text();
}

inline bool operator==(const ProblemFile& a, const ProblemFile& b) {
  auto same_vec = [](const std::optional<Vector>& x, const std::optional<Vector>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->size() == y->size() && *x == *y);
  };
  if (a.name != b.name || a.dim != b.dim || a.tau != b.tau) return false;
  if (a.expr.has_value() != b.expr.has_value() || (a.expr && !(*a.expr == *b.expr))) return false;
  if (a.family.has_value() != b.family.has_value() || (a.family && !same_family(*a.family, *b.family))) return false;
  if (!same_vec(a.slater, b.slater) || !same_vec(a.point, b.point)) return false;
  if (a.box.has_value() != b.box.has_value()) return false;
  return !a.box || (a.box->lo == b.box->lo && a.box->hi == b.box->hi);
}

}  // namespace ebstab
