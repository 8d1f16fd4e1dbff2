#include "stasmc/dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace stasmc {

ParseError::ParseError(const std::string &msg, SourceSpan span, std::vector<std::string> expected)
    : std::runtime_error(msg), span_(std::move(span)), expected_(std::move(expected)) {}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok : std::uint8_t { Ident, Int, Real, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
};

std::string describe(const Token &t) {
  switch (t.kind) {
  case Tok::End:
    return "end of input";
  case Tok::Ident:
    return "identifier '" + t.text + "'";
  case Tok::Int:
  case Tok::Real:
    return "number '" + t.text + "'";
  case Tok::Sym:
    return "'" + t.text + "'";
  }
  return "?";
}

std::vector<Token> lex(std::string_view text, const std::string &file, int first_line = 1) {
  static const char *const two_char[] = {"->", "<=", ">=", "==", "!=", "&&",
                                         "||", ":=", "<>", "=>"};
  std::vector<Token> out;
  int line = first_line, col = 1;
  std::size_t i = 0;
  auto make = [&](Tok k, std::size_t start, std::size_t len, int l, int c) {
    Token t;
    t.kind = k;
    t.text = std::string(text.substr(start, len));
    t.span = SourceSpan{file, l, c, static_cast<int>(len)};
    out.push_back(std::move(t));
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      ++col;
      continue;
    }
    if (ch == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    const std::size_t start = i;
    const int start_col = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        ++i;
      std::string_view word = text.substr(start, i - start);
      // `simulate100` as written in some tables.
      if (word.size() > 8 && word.substr(0, 8) == "simulate" &&
          word.find_first_not_of("0123456789", 8) == std::string_view::npos) {
        make(Tok::Ident, start, 8, line, start_col);
        make(Tok::Int, start + 8, word.size() - 8, line, start_col + 8);
      } else {
        make(Tok::Ident, start, i - start, line, start_col);
      }
      col += static_cast<int>(i - start);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) ||
        (ch == '.' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      bool real = false;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
          std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        real = true;
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          real = true;
          i = j;
          while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
      }
      make(real ? Tok::Real : Tok::Int, start, i - start, line, start_col);
      col += static_cast<int>(i - start);
      continue;
    }
    bool matched = false;
    if (i + 1 < text.size()) {
      for (const char *sym : two_char) {
        if (text[i] == sym[0] && text[i + 1] == sym[1]) {
          make(Tok::Sym, start, 2, line, start_col);
          i += 2;
          col += 2;
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    if (std::string_view("=<>!?:;,(){}[]+-*/%.").find(ch) != std::string_view::npos) {
      make(Tok::Sym, start, 1, line, start_col);
      ++i;
      ++col;
      continue;
    }
    throw ParseError("unexpected character '" + std::string(1, ch) + "'",
                     SourceSpan{file, line, col, 1}, {});
  }
  Token end;
  end.kind = Tok::End;
  end.span = SourceSpan{file, line, col, 0};
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

const std::set<std::string> kDeclKeywords = {"int", "real", "bool", "clock", "chan", "broadcast"};

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token &peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is_sym(const char *s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Sym && peek(ahead).text == s;
  }
  bool is_word(const char *s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == s;
  }
  Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  bool accept_sym(const char *s) {
    if (!is_sym(s)) return false;
    ++pos_;
    return true;
  }
  bool accept_word(const char *s) {
    if (!is_word(s)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    std::string msg = "expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    msg += " but found " + describe(peek());
    throw ParseError(msg, peek().span, std::move(expected));
  }

  Token expect_sym(const char *s) {
    if (!is_sym(s)) fail({std::string("'") + s + "'"});
    return take();
  }
  void expect_word(const char *s) {
    if (!is_word(s)) fail({std::string("'") + s + "'"});
    take();
  }
  Token expect_ident() {
    if (peek().kind != Tok::Ident) fail({"identifier"});
    return take();
  }

  double number() {
    bool neg = accept_sym("-");
    if (peek().kind != Tok::Int && peek().kind != Tok::Real) fail({"number"});
    const double v = std::strtod(take().text.c_str(), nullptr);
    return neg ? -v : v;
  }

  long long integer() {
    if (peek().kind != Tok::Int) fail({"integer"});
    return std::strtoll(take().text.c_str(), nullptr, 10);
  }

  std::string qualified_name() {
    Token t = expect_ident();
    std::string name = t.text;
    while (is_sym(".") && peek(1).kind == Tok::Ident) {
      take();
      name += "." + take().text;
    }
    return name;
  }

  // ---- expressions --------------------------------------------------------

  Expr expr() { return cond(); }

  Expr cond() {
    Expr c = imply();
    if (is_sym("?")) {
      const SourceSpan sp = take().span;
      Expr a = cond();
      expect_sym(":");
      Expr b = cond();
      Expr e = Expr::cond(std::move(c), std::move(a), std::move(b));
      e.span = sp;
      return e;
    }
    return c;
  }

  Expr imply() {
    Expr a = disj();
    if (is_word("imply") || is_sym("=>")) {
      const SourceSpan sp = take().span;
      Expr b = imply();
      Expr e = Expr::binary(ExprOp::Imply, std::move(a), std::move(b));
      e.span = sp;
      return e;
    }
    return a;
  }

  Expr disj() {
    Expr a = conj();
    while (is_sym("||") || is_word("or")) {
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(ExprOp::Or, std::move(a), conj()), sp);
    }
    return a;
  }

  Expr conj() {
    Expr a = equality();
    while (is_sym("&&") || is_word("and")) {
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(ExprOp::And, std::move(a), equality()), sp);
    }
    return a;
  }

  Expr equality() {
    Expr a = relational();
    for (;;) {
      ExprOp op;
      if (is_sym("==")) op = ExprOp::Eq;
      else if (is_sym("!=")) op = ExprOp::Ne;
      else return a;
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(op, std::move(a), relational()), sp);
    }
  }

  Expr relational() {
    Expr a = additive();
    for (;;) {
      ExprOp op;
      if (is_sym("<")) op = ExprOp::Lt;
      else if (is_sym("<=")) op = ExprOp::Le;
      else if (is_sym(">")) op = ExprOp::Gt;
      else if (is_sym(">=")) op = ExprOp::Ge;
      else return a;
      // `Pr[..](..) >= Pr[..]` and `... >= 0.95` are handled by the query
      // parser, which stops expressions at the closing parenthesis.
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(op, std::move(a), additive()), sp);
    }
  }

  Expr additive() {
    Expr a = multiplicative();
    for (;;) {
      ExprOp op;
      if (is_sym("+")) op = ExprOp::Add;
      else if (is_sym("-")) op = ExprOp::Sub;
      else return a;
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(op, std::move(a), multiplicative()), sp);
    }
  }

  Expr multiplicative() {
    Expr a = unary();
    for (;;) {
      ExprOp op;
      if (is_sym("*")) op = ExprOp::Mul;
      else if (is_sym("/")) op = ExprOp::Div;
      else if (is_sym("%")) op = ExprOp::Mod;
      else return a;
      const SourceSpan sp = take().span;
      a = with_span(Expr::binary(op, std::move(a), unary()), sp);
    }
  }

  Expr unary() {
    if (is_sym("!") || is_word("not")) {
      const SourceSpan sp = take().span;
      return with_span(Expr::unary(ExprOp::Not, unary()), sp);
    }
    if (is_sym("-")) {
      const SourceSpan sp = take().span;
      Expr inner = unary();
      if (inner.op == ExprOp::Literal && inner.literal.kind != ValueKind::Bool) {
        inner.literal = inner.literal.kind == ValueKind::Int ? Value::integer(-inner.literal.i)
                                                             : Value::real(-inner.literal.r);
        inner.span = sp;
        return inner;
      }
      return with_span(Expr::unary(ExprOp::Neg, std::move(inner)), sp);
    }
    return primary();
  }

  Expr primary() {
    const Token &t = peek();
    if (t.kind == Tok::Int) {
      Token tok = take();
      return with_span(Expr::lit(Value::integer(std::strtoll(tok.text.c_str(), nullptr, 10))), tok.span);
    }
    if (t.kind == Tok::Real) {
      Token tok = take();
      return with_span(Expr::lit(Value::real(std::strtod(tok.text.c_str(), nullptr))), tok.span);
    }
    if (is_word("true") || is_word("false")) {
      Token tok = take();
      return with_span(Expr::lit(Value::boolean(tok.text == "true")), tok.span);
    }
    if (t.kind == Tok::Ident) {
      const SourceSpan sp = t.span;
      std::string name = qualified_name();
      if (is_sym("(")) {
        take();
        std::vector<Expr> args;
        if (!is_sym(")")) {
          args.push_back(expr());
          while (accept_sym(",")) args.push_back(expr());
        }
        expect_sym(")");
        return with_span(Expr::call(std::move(name), std::move(args)), sp);
      }
      return with_span(Expr::ident(std::move(name)), sp);
    }
    if (is_sym("(")) {
      take();
      Expr e = expr();
      expect_sym(")");
      return e;
    }
    fail({"expression"});
  }

  static Expr with_span(Expr e, const SourceSpan &sp) {
    e.span = sp;
    return e;
  }

  // ---- model --------------------------------------------------------------

  Model model() {
    Model m;
    bool have_system = false;
    while (!at_end()) {
      if (peek().kind == Tok::Ident && kDeclKeywords.count(peek().text)) {
        decls(m.decls);
      } else if (is_word("template")) {
        m.templates.push_back(template_def());
      } else if (is_word("system")) {
        if (have_system) fail({"end of input"});
        system(m.system);
        have_system = true;
      } else {
        fail({"declaration", "'template'", "'system'"});
      }
    }
    if (!have_system) fail({"'system'"});
    return m;
  }

  void decls(std::vector<Decl> &out) {
    const SourceSpan sp = peek().span;
    DeclType type;
    if (accept_word("broadcast")) {
      expect_word("chan");
      type = DeclType::BroadcastChan;
    } else if (accept_word("chan")) {
      type = DeclType::Chan;
    } else if (accept_word("int")) {
      type = DeclType::Int;
    } else if (accept_word("real")) {
      type = DeclType::Real;
    } else if (accept_word("bool")) {
      type = DeclType::Bool;
    } else if (accept_word("clock")) {
      type = DeclType::Clock;
    } else {
      fail({"declaration"});
    }
    do {
      Decl d;
      d.type = type;
      const Token name = expect_ident();
      d.name = name.text;
      d.span = name.span;
      (void)sp;
      if (accept_sym("=")) d.init = expr();
      out.push_back(std::move(d));
    } while (accept_sym(","));
    expect_sym(";");
  }

  Template template_def() {
    Template t;
    t.span = peek().span;
    expect_word("template");
    t.name = expect_ident().text;
    expect_sym("(");
    if (!is_sym(")")) {
      do t.params.push_back(param());
      while (accept_sym(","));
    }
    expect_sym(")");
    expect_sym("{");
    while (!is_sym("}")) {
      if (peek().kind == Tok::Ident && kDeclKeywords.count(peek().text)) {
        decls(t.decls);
      } else if (is_word("init") || is_word("committed") || is_word("loc")) {
        t.locations.push_back(location());
      } else if (peek().kind == Tok::Ident && is_sym("->", 1)) {
        t.edges.push_back(edge());
      } else {
        fail({"declaration", "location", "edge", "'}'"});
      }
    }
    expect_sym("}");
    return t;
  }

  Param param() {
    auto type_of = [&](const Token &tok) {
      if (tok.text == "int") return ValueKind::Int;
      if (tok.text == "real") return ValueKind::Real;
      if (tok.text == "bool") return ValueKind::Bool;
      fail({"'int'", "'real'", "'bool'"});
    };
    Param p;
    if (is_word("int") || is_word("real") || is_word("bool")) {
      p.type = type_of(take());
      p.name = expect_ident().text;
    } else {
      p.name = expect_ident().text;
      expect_sym(":");
      if (!(is_word("int") || is_word("real") || is_word("bool"))) fail({"'int'", "'real'", "'bool'"});
      p.type = type_of(take());
    }
    return p;
  }

  Location location() {
    Location l;
    l.span = peek().span;
    if (accept_word("init")) l.initial = true;
    if (accept_word("committed")) l.kind = LocationKind::Committed;
    expect_word("loc");
    const Token name = expect_ident();
    l.id = name.text;
    l.span = name.span;
    if (accept_sym("{")) {
      while (!accept_sym("}")) {
        if (accept_word("inv")) {
          Expr e = expr();
          l.invariant = l.invariant ? Expr::binary(ExprOp::And, std::move(*l.invariant), std::move(e))
                                    : std::move(e);
          expect_sym(";");
        } else if (accept_word("rate")) {
          RateDef r;
          r.clock = qualified_name();
          expect_sym("=");
          r.rate = expr();
          l.rates.push_back(std::move(r));
          expect_sym(";");
        } else if (accept_word("exitrate")) {
          l.exit_rate = number();
          expect_sym(";");
        } else {
          fail({"'inv'", "'rate'", "'exitrate'", "'}'"});
        }
      }
    } else {
      accept_sym(";");
    }
    return l;
  }

  Edge edge() {
    Edge e;
    e.span = peek().span;
    e.source = expect_ident().text;
    expect_sym("->");
    e.target = expect_ident().text;
    expect_sym("{");
    while (!accept_sym("}")) {
      if (accept_word("guard")) {
        Expr g = expr();
        e.guard = e.guard ? Expr::binary(ExprOp::And, std::move(*e.guard), std::move(g)) : std::move(g);
        expect_sym(";");
      } else if (accept_word("sync")) {
        if (e.sync) fail({"at most one sync"});
        Sync s;
        s.channel = expect_ident().text;
        if (accept_sym("!")) s.dir = SyncDir::Emit;
        else if (accept_sym("?")) s.dir = SyncDir::Receive;
        else fail({"'!'", "'?'"});
        e.sync = s;
        expect_sym(";");
      } else if (accept_word("weight")) {
        e.weight = number();
        expect_sym(";");
      } else if (accept_word("update")) {
        do {
          Assignment a;
          a.span = peek().span;
          a.target = qualified_name();
          if (!accept_sym(":=")) expect_sym("=");
          a.value = expr();
          e.updates.push_back(std::move(a));
        } while (accept_sym(","));
        expect_sym(";");
      } else {
        fail({"'guard'", "'sync'", "'weight'", "'update'", "'}'"});
      }
    }
    return e;
  }

  void system(std::vector<Instantiation> &out) {
    expect_word("system");
    do {
      Instantiation in;
      in.span = peek().span;
      std::string first = expect_ident().text;
      if (accept_sym("=")) {
        in.instance = first;
        in.template_name = expect_ident().text;
      } else {
        in.template_name = first;
      }
      if (accept_sym("(")) {
        if (!is_sym(")")) {
          in.args.push_back(expr());
          while (accept_sym(",")) in.args.push_back(expr());
        }
        expect_sym(")");
      }
      out.push_back(std::move(in));
    } while (accept_sym(","));
    expect_sym(";");
  }

  // ---- queries ------------------------------------------------------------

  double bound_spec(bool allow_ge) {
    if (!accept_sym("<=")) {
      if (allow_ge && accept_sym(">=")) {
        // `E[>=B; N]` names the same simulation horizon as `E[<=B; N]`.
      } else if (!(peek().kind == Tok::Int || peek().kind == Tok::Real)) {
        fail({"'<='", "number"});
      }
    }
    const Token &t = peek();
    const double b = number();
    if (!(b > 0.0)) throw ParseError("time bound must be positive", t.span, {"positive number"});
    return b;
  }

  PathFormula path() {
    PathFormula f;
    if (accept_sym("<>")) {
      f.kind = PathKind::Eventually;
    } else if (is_sym("[") && is_sym("]", 1)) {
      take();
      take();
      f.kind = PathKind::Globally;
    } else {
      fail({"'<>'", "'[]'"});
    }
    f.state = expr();
    return f;
  }

  // Pr[<=B](path), returning (path, bound)
  std::pair<PathFormula, double> probability() {
    expect_word("Pr");
    expect_sym("[");
    const double b = bound_spec(false);
    expect_sym("]");
    PathFormula f;
    if (accept_sym("(")) {
      f = path();
      expect_sym(")");
    } else {
      f = path();
    }
    return {std::move(f), b};
  }

  double probability_literal() {
    const Token &t = peek();
    const double p = number();
    if (p < 0.0 || p > 1.0)
      throw ParseError("probability must lie in [0, 1]", t.span, {"number in [0, 1]"});
    return p;
  }

  Query query() {
    if (is_word("Pr")) {
      auto [f, b] = probability();
      if (is_sym(">=") || is_sym("<=")) {
        const bool ge = take().text == ">=";
        if (ge && is_word("Pr")) {
          auto [f2, b2] = probability();
          return CompareQuery{std::move(f), b, std::move(f2), b2};
        }
        HypothesisQuery h;
        h.path = std::move(f);
        h.bound = b;
        h.p0 = probability_literal();
        h.relation = ge ? Relation::AtLeast : Relation::AtMost;
        return h;
      }
      return EstimateQuery{std::move(f), b};
    }
    if (accept_word("simulate")) {
      SimulateQuery s;
      const Token &t = peek();
      s.runs = integer();
      if (s.runs < 1) throw ParseError("number of runs must be >= 1", t.span, {"positive integer"});
      expect_sym("[");
      s.bound = bound_spec(false);
      expect_sym("]");
      expect_sym("{");
      s.exprs.push_back(expr());
      while (accept_sym(",")) s.exprs.push_back(expr());
      expect_sym("}");
      return s;
    }
    if (accept_word("E")) {
      ExpectedQuery q;
      expect_sym("[");
      q.bound = bound_spec(true);
      expect_sym(";");
      const Token &t = peek();
      q.runs = integer();
      if (q.runs < 1) throw ParseError("number of runs must be >= 1", t.span, {"positive integer"});
      expect_sym("]");
      expect_sym("(");
      // Some tables write `E[..]([] max: x)`; the box is redundant.
      if (is_sym("[") && is_sym("]", 1)) {
        take();
        take();
      }
      if (accept_word("max")) q.mode = ExtremumMode::Max;
      else if (accept_word("min")) q.mode = ExtremumMode::Min;
      else fail({"'max'", "'min'"});
      expect_sym(":");
      q.expr = expr();
      expect_sym(")");
      return q;
    }
    fail({"'Pr'", "'simulate'", "'E'"});
  }

  WhConstraint constraint() {
    WhConstraint c;
    expect_word("constraint");
    c.name = expect_ident().text;
    const Token kind = expect_ident();
    if (kind.text == "execution") c.kind = ConstraintKind::Execution;
    else if (kind.text == "synchronization") c.kind = ConstraintKind::Synchronization;
    else if (kind.text == "periodic") c.kind = ConstraintKind::Periodic;
    else if (kind.text == "end_to_end" || kind.text == "endtoend") c.kind = ConstraintKind::EndToEnd;
    else {
      --pos_;
      fail({"'execution'", "'synchronization'", "'periodic'", "'end_to_end'"});
    }
    expect_sym("(");
    if (!is_sym(")")) {
      do {
        const Token key = expect_ident();
        expect_sym("=");
        if (key.text == "short") {
          const Token v = expect_ident();
          if (v.text == "proportional") c.short_window = ShortWindowPolicy::Proportional;
          else if (v.text == "vacuous") c.short_window = ShortWindowPolicy::VacuouslyTrue;
          else throw ParseError("unknown short-window policy", v.span, {"'proportional'", "'vacuous'"});
          continue;
        }
        const double v = number();
        if (key.text == "lower") c.lower = v;
        else if (key.text == "upper") c.upper = v;
        else if (key.text == "tolerance") c.tolerance = v;
        else if (key.text == "jitter") c.jitter = v;
        else if (key.text == "period") c.lower = c.upper = v;
        else if (key.text == "m") c.m = static_cast<int>(v);
        else if (key.text == "k") c.k = static_cast<int>(v);
        else
          throw ParseError("unknown constraint parameter '" + key.text + "'", key.span,
                           {"lower", "upper", "tolerance", "jitter", "period", "m", "k", "short"});
      } while (accept_sym(","));
    }
    expect_sym(")");
    expect_word("on");
    do {
      const Token role = expect_ident();
      expect_sym("=");
      EventBinding b;
      if (is_word("when") && is_sym("(", 1)) {
        take();
        take();
        b.predicate = expr();
        expect_sym(")");
      } else {
        b.channel = expect_ident().text;
      }
      if (c.kind == ConstraintKind::Synchronization) c.streams.push_back(std::move(b));
      else c.events[role.text] = std::move(b);
    } while (accept_sym(","));
    accept_sym(";");
    return c;
  }

  std::size_t pos_ = 0;

private:
  std::vector<Token> toks_;
};

void expect_end(Parser &p) {
  if (!p.at_end()) p.fail({"end of line"});
}

} // namespace

Model parse_model(std::string_view text, const std::string &file) {
  Parser p(lex(text, file));
  return p.model();
}

QueryFile parse_query_file(std::string_view text, const std::string &file) {
  QueryFile out;
  struct PendingExpect {
    std::string name;
    Expectation exp;
    SourceSpan span;
  };
  std::vector<PendingExpect> expects;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    Parser p(lex(text.substr(start, end - start), file, line_no));
    start = end + 1;
    if (p.at_end()) continue;
    if (p.is_word("constraint") && p.peek(1).kind == Tok::Ident && p.peek(2).kind == Tok::Ident) {
      out.constraints.push_back(p.constraint());
      expect_end(p);
      continue;
    }
    if (p.is_word("expect") && p.peek(1).kind == Tok::Ident) {
      p.take();
      PendingExpect pe;
      const Token name = p.expect_ident();
      pe.name = name.text;
      pe.span = name.span;
      if (p.accept_word("in")) {
        p.expect_sym("[");
        const double lo = p.number();
        p.expect_sym(",");
        const double hi = p.number();
        p.expect_sym("]");
        pe.exp.range = std::make_pair(lo, hi);
      } else {
        const Token v = p.expect_ident();
        pe.exp.verdict = parse_verdict(v.text);
        if (!pe.exp.verdict)
          throw ParseError("unknown verdict '" + v.text + "'", v.span,
                           {"'valid'", "'invalid'", "'undecided'", "'estimate-only'"});
      }
      p.accept_sym(";");
      expect_end(p);
      expects.push_back(std::move(pe));
      continue;
    }
    NamedQuery nq;
    nq.span = p.peek().span;
    if (p.peek().kind == Tok::Ident && p.is_sym(":", 1)) {
      nq.name = p.take().text;
      p.take();
    }
    nq.query = p.query();
    p.accept_sym(";");
    expect_end(p);
    out.queries.push_back(std::move(nq));
    if (end == text.size()) break;
  }
  for (auto &pe : expects) {
    bool found = false;
    for (auto &q : out.queries) {
      if (q.name != pe.name) continue;
      q.expected = pe.exp;
      found = true;
    }
    if (!found)
      throw ParseError("expectation for unknown query '" + pe.name + "'", pe.span, {"query name"});
  }
  return out;
}

std::vector<NamedQuery> parse_queries(std::string_view text, const std::string &file) {
  return parse_query_file(text, file).queries;
}

Query parse_query(std::string_view text) {
  Parser p(lex(text, ""));
  Query q = p.query();
  p.accept_sym(";");
  expect_end(p);
  return q;
}

Expr parse_expr(std::string_view text) {
  Parser p(lex(text, ""));
  Expr e = p.expr();
  expect_end(p);
  return e;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string num(double v) {
  if (std::floor(v) == v && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  return format_real(v);
}

const char *decl_keyword(DeclType t) {
  switch (t) {
  case DeclType::Bool:
    return "bool";
  case DeclType::Int:
    return "int";
  case DeclType::Real:
    return "real";
  case DeclType::Clock:
    return "clock";
  case DeclType::Chan:
    return "chan";
  case DeclType::BroadcastChan:
    return "broadcast chan";
  }
  return "?";
}

void print_decl(const Decl &d, const std::string &indent, std::ostringstream &os) {
  os << indent << decl_keyword(d.type) << ' ' << d.name;
  if (d.init) os << " = " << to_string(*d.init);
  os << ";\n";
}

} // namespace

std::string print_model(const Model &model) {
  std::ostringstream os;
  for (const auto &d : model.decls) print_decl(d, "", os);
  for (const auto &t : model.templates) {
    os << "\ntemplate " << t.name << '(';
    for (std::size_t i = 0; i < t.params.size(); ++i) {
      if (i) os << ", ";
      os << kind_name(t.params[i].type) << ' ' << t.params[i].name;
    }
    os << ") {\n";
    for (const auto &d : t.decls) print_decl(d, "  ", os);
    for (const auto &l : t.locations) {
      os << "  " << (l.initial ? "init " : "")
         << (l.kind == LocationKind::Committed ? "committed " : "") << "loc " << l.id;
      if (l.invariant || !l.rates.empty() || l.exit_rate) {
        os << " {";
        if (l.invariant) os << " inv " << to_string(*l.invariant) << ';';
        for (const auto &r : l.rates) os << " rate " << r.clock << " = " << to_string(r.rate) << ';';
        if (l.exit_rate) os << " exitrate " << num(*l.exit_rate) << ';';
        os << " }";
      }
      os << '\n';
    }
    for (const auto &e : t.edges) {
      os << "  " << e.source << " -> " << e.target << " {";
      if (e.guard) os << " guard " << to_string(*e.guard) << ';';
      if (e.sync) os << " sync " << e.sync->channel << (e.sync->dir == SyncDir::Emit ? '!' : '?') << ';';
      if (e.weight != 1.0) os << " weight " << num(e.weight) << ';';
      if (!e.updates.empty()) {
        os << " update ";
        for (std::size_t i = 0; i < e.updates.size(); ++i) {
          if (i) os << ", ";
          os << e.updates[i].target << " := " << to_string(e.updates[i].value);
        }
        os << ';';
      }
      os << " }\n";
    }
    os << "}\n";
  }
  os << "\nsystem ";
  for (std::size_t i = 0; i < model.system.size(); ++i) {
    const auto &in = model.system[i];
    if (i) os << ",\n       ";
    if (!in.instance.empty()) os << in.instance << " = ";
    os << in.template_name;
    if (!in.args.empty()) {
      os << '(';
      for (std::size_t j = 0; j < in.args.size(); ++j) {
        if (j) os << ", ";
        os << to_string(in.args[j]);
      }
      os << ')';
    }
  }
  os << ";\n";
  return os.str();
}

const char *to_string(ConstraintKind k) {
  switch (k) {
  case ConstraintKind::Execution:
    return "execution";
  case ConstraintKind::Synchronization:
    return "synchronization";
  case ConstraintKind::Periodic:
    return "periodic";
  case ConstraintKind::EndToEnd:
    return "end_to_end";
  }
  return "?";
}

std::string to_string(const WhConstraint &c) {
  std::ostringstream os;
  os << "constraint " << c.name << ' ' << to_string(c.kind) << '(';
  switch (c.kind) {
  case ConstraintKind::Synchronization:
    os << "tolerance=" << num(c.tolerance);
    break;
  case ConstraintKind::Periodic:
    os << "lower=" << num(c.lower) << ", upper=" << num(c.upper) << ", jitter=" << num(c.jitter);
    break;
  default:
    os << "lower=" << num(c.lower) << ", upper=" << num(c.upper);
  }
  os << ", m=" << c.m << ", k=" << c.k;
  if (c.short_window == ShortWindowPolicy::VacuouslyTrue) os << ", short=vacuous";
  os << ") on ";
  auto binding = [](const EventBinding &b) {
    return b.predicate ? "when(" + to_string(*b.predicate) + ")" : b.channel;
  };
  bool first = true;
  if (c.kind == ConstraintKind::Synchronization) {
    for (std::size_t i = 0; i < c.streams.size(); ++i) {
      os << (first ? "" : ", ") << 'e' << i + 1 << '=' << binding(c.streams[i]);
      first = false;
    }
  } else {
    for (const auto &[role, b] : c.events) {
      os << (first ? "" : ", ") << role << '=' << binding(b);
      first = false;
    }
  }
  os << ';';
  return os.str();
}

std::string print_query_file(const QueryFile &file) {
  std::ostringstream os;
  for (const auto &c : file.constraints) os << to_string(c) << '\n';
  for (const auto &q : file.queries) {
    if (!q.name.empty()) os << q.name << ": ";
    os << to_string(q.query) << '\n';
  }
  for (const auto &q : file.queries) {
    if (!q.expected || q.name.empty()) continue;
    os << "expect " << q.name << ' ';
    if (q.expected->range)
      os << "in [" << num(q.expected->range->first) << ", " << num(q.expected->range->second) << ']';
    else if (q.expected->verdict)
      os << (*q.expected->verdict == Verdict::EstimateOnly ? "estimate" : to_string(*q.expected->verdict));
    os << ";\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

const char *to_string(Verdict v) {
  switch (v) {
  case Verdict::Valid:
    return "valid";
  case Verdict::Invalid:
    return "invalid";
  case Verdict::EstimateOnly:
    return "estimate-only";
  case Verdict::Undecided:
    return "undecided";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(const std::string &s) {
  if (s == "valid") return Verdict::Valid;
  if (s == "invalid") return Verdict::Invalid;
  if (s == "undecided") return Verdict::Undecided;
  if (s == "estimate" || s == "estimate_only") return Verdict::EstimateOnly;
  return std::nullopt;
}

double query_bound(const Query &q) {
  return std::visit(
      [](const auto &v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CompareQuery>) return std::max(v.left_bound, v.right_bound);
        else return v.bound;
      },
      q);
}

std::string to_string(const PathFormula &f) {
  return std::string(f.kind == PathKind::Eventually ? "<> " : "[] ") + to_string(f.state);
}

std::string to_string(const Query &q) {
  return std::visit(
      [](const auto &v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, EstimateQuery>) {
          return "Pr[<=" + num(v.bound) + "](" + to_string(v.path) + ")";
        } else if constexpr (std::is_same_v<T, HypothesisQuery>) {
          return "Pr[<=" + num(v.bound) + "](" + to_string(v.path) + ") " +
                 (v.relation == Relation::AtLeast ? ">= " : "<= ") + num(v.p0);
        } else if constexpr (std::is_same_v<T, SimulateQuery>) {
          std::string s = "simulate " + std::to_string(v.runs) + " [<=" + num(v.bound) + "] {";
          for (std::size_t i = 0; i < v.exprs.size(); ++i) s += (i ? ", " : "") + to_string(v.exprs[i]);
          return s + "}";
        } else if constexpr (std::is_same_v<T, CompareQuery>) {
          return "Pr[<=" + num(v.left_bound) + "](" + to_string(v.left) + ") >= Pr[<=" +
                 num(v.right_bound) + "](" + to_string(v.right) + ")";
        } else {
          return "E[<=" + num(v.bound) + "; " + std::to_string(v.runs) + "](" +
                 (v.mode == ExtremumMode::Max ? "max: " : "min: ") + to_string(v.expr) + ")";
        }
      },
      q);
}

namespace {

bool same_path(const PathFormula &a, const PathFormula &b) {
  return a.kind == b.kind && same_structure(a.state, b.state);
}

bool same_opt(const std::optional<Expr> &a, const std::optional<Expr> &b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_structure(*a, *b);
}

} // namespace

bool same_structure(const Query &a, const Query &b) {
  if (a.index() != b.index()) return false;
  if (auto *x = std::get_if<EstimateQuery>(&a)) {
    auto &y = std::get<EstimateQuery>(b);
    return x->bound == y.bound && same_path(x->path, y.path);
  }
  if (auto *x = std::get_if<HypothesisQuery>(&a)) {
    auto &y = std::get<HypothesisQuery>(b);
    return x->bound == y.bound && x->p0 == y.p0 && x->relation == y.relation &&
           same_path(x->path, y.path);
  }
  if (auto *x = std::get_if<SimulateQuery>(&a)) {
    auto &y = std::get<SimulateQuery>(b);
    if (x->runs != y.runs || x->bound != y.bound || x->exprs.size() != y.exprs.size()) return false;
    for (std::size_t i = 0; i < x->exprs.size(); ++i)
      if (!same_structure(x->exprs[i], y.exprs[i])) return false;
    return true;
  }
  if (auto *x = std::get_if<CompareQuery>(&a)) {
    auto &y = std::get<CompareQuery>(b);
    return x->left_bound == y.left_bound && x->right_bound == y.right_bound &&
           same_path(x->left, y.left) && same_path(x->right, y.right);
  }
  auto &x = std::get<ExpectedQuery>(a);
  auto &y = std::get<ExpectedQuery>(b);
  return x.bound == y.bound && x.runs == y.runs && x.mode == y.mode && same_structure(x.expr, y.expr);
}

bool same_structure(const Model &a, const Model &b) {
  auto same_decls = [](const std::vector<Decl> &x, const std::vector<Decl> &y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].type != y[i].type || x[i].name != y[i].name || !same_opt(x[i].init, y[i].init))
        return false;
    return true;
  };
  if (!same_decls(a.decls, b.decls) || a.templates.size() != b.templates.size() ||
      a.system.size() != b.system.size())
    return false;
  for (std::size_t i = 0; i < a.templates.size(); ++i) {
    const Template &s = a.templates[i], &t = b.templates[i];
    if (s.name != t.name || s.params.size() != t.params.size() || !same_decls(s.decls, t.decls) ||
        s.locations.size() != t.locations.size() || s.edges.size() != t.edges.size())
      return false;
    for (std::size_t j = 0; j < s.params.size(); ++j)
      if (s.params[j].name != t.params[j].name || s.params[j].type != t.params[j].type) return false;
    for (std::size_t j = 0; j < s.locations.size(); ++j) {
      const Location &l = s.locations[j], &m = t.locations[j];
      if (l.id != m.id || l.initial != m.initial || l.kind != m.kind || l.exit_rate != m.exit_rate ||
          !same_opt(l.invariant, m.invariant) || l.rates.size() != m.rates.size())
        return false;
      for (std::size_t r = 0; r < l.rates.size(); ++r)
        if (l.rates[r].clock != m.rates[r].clock || !same_structure(l.rates[r].rate, m.rates[r].rate))
          return false;
    }
    for (std::size_t j = 0; j < s.edges.size(); ++j) {
      const Edge &e = s.edges[j], &f = t.edges[j];
      if (e.source != f.source || e.target != f.target || e.weight != f.weight ||
          !same_opt(e.guard, f.guard) || e.sync.has_value() != f.sync.has_value() ||
          e.updates.size() != f.updates.size())
        return false;
      if (e.sync && (e.sync->channel != f.sync->channel || e.sync->dir != f.sync->dir)) return false;
      for (std::size_t u = 0; u < e.updates.size(); ++u)
        if (e.updates[u].target != f.updates[u].target ||
            !same_structure(e.updates[u].value, f.updates[u].value))
          return false;
    }
  }
  for (std::size_t i = 0; i < a.system.size(); ++i) {
    const auto &x = a.system[i], &y = b.system[i];
    if (x.instance != y.instance || x.template_name != y.template_name || x.args.size() != y.args.size())
      return false;
    for (std::size_t j = 0; j < x.args.size(); ++j)
      if (!same_structure(x.args[j], y.args[j])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

const EventBinding *WhConstraint::event(const std::string &role) const {
  auto it = events.find(role);
  return it == events.end() ? nullptr : &it->second;
}

std::string check_constraint(const WhConstraint &c) {
  if (c.m < 1) return "m must be >= 1";
  if (c.m > c.k) return "m must not exceed k";
  auto need = [&](const char *role) -> std::string {
    return c.event(role) ? "" : std::string("missing binding for '") + role + "'";
  };
  switch (c.kind) {
  case ConstraintKind::Execution:
    if (c.lower > c.upper) return "lower must not exceed upper";
    if (auto s = need("start"); !s.empty()) return s;
    if (auto s = need("stop"); !s.empty()) return s;
    if (c.event("preempt") != nullptr && c.event("resume") == nullptr) return "preempt requires resume";
    if (c.event("resume") != nullptr && c.event("preempt") == nullptr) return "resume requires preempt";
    return "";
  case ConstraintKind::Synchronization:
    if (c.tolerance < 0.0) return "tolerance must be >= 0";
    if (c.streams.size() < 2) return "synchronization needs at least two event streams";
    return "";
  case ConstraintKind::Periodic:
    if (c.lower > c.upper) return "lower must not exceed upper";
    if (c.jitter < 0.0) return "jitter must be >= 0";
    return need("occurrence");
  case ConstraintKind::EndToEnd:
    if (c.lower > c.upper) return "lower must not exceed upper";
    if (auto s = need("source"); !s.empty()) return s;
    return need("target");
  }
  return "";
}

} // namespace stasmc
