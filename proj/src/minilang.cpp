// Copyright (c) kiki-verify contributors.
// SPDX-License-Identifier: Apache-2.0

#include "kiki/minilang.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace kiki {

namespace {

struct Token {
  enum class Kind { Id, Int, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int col = 1;
};

const std::set<std::string> kKeywords = {"record", "int",    "malloc", "free",   "if",   "else",
                                         "while",  "assert", "assume", "skip",   "NULL", "nondet"};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Token::Kind::Id;
      t.text = src.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Token::Kind::Int;
      t.text = src.substr(i, j - i);
      if (t.text.size() > 18) throw ParseError(line, col, "integer literal too large");
      t.value = std::stoll(t.text);
      advance(j - i);
    } else {
      static const char* two[] = {"->", "==", "!=", "<=", ">=", "&&", "||"};
      t.kind = Token::Kind::Punct;
      bool matched = false;
      for (const char* op : two) {
        if (src.compare(i, 2, op) == 0) {
          t.text = op;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string("+-*<>!=(){};").find(c) == std::string::npos) {
          throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        }
        t.text = std::string(1, c);
      }
      advance(t.text.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program program() {
    Program p;
    while (is_id("record")) p.records.push_back(record_decl());
    while (starts_var_decl()) p.vars.push_back(var_decl());
    while (peek().kind != Token::Kind::End) p.body.push_back(stmt());
    return p;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_punct(const char* p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Punct && peek(ahead).text == p;
  }
  bool is_id(const char* kw, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::Id && peek(ahead).text == kw;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    std::string got = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.line, t.col, msg + ", got " + got);
  }
  void expect(const char* p) {
    if (!is_punct(p)) fail(peek(), std::string("expected '") + p + "'");
    next();
  }
  void expect_kw(const char* kw) {
    if (!is_id(kw)) fail(peek(), std::string("expected '") + kw + "'");
    next();
  }
  std::string ident() {
    const Token& t = peek();
    if (t.kind != Token::Kind::Id || kKeywords.count(t.text)) fail(t, "expected identifier");
    next();
    return t.text;
  }

  bool starts_var_decl() const {
    if (is_id("int")) return true;
    return peek().kind == Token::Kind::Id && !kKeywords.count(peek().text) && is_punct("*", 1);
  }

  VarType type_name() {
    if (is_id("int")) {
      next();
      return VarType::integer();
    }
    std::string rec = ident();
    expect("*");
    return VarType::pointer(rec);
  }

  RecordDecl record_decl() {
    expect_kw("record");
    RecordDecl r;
    r.name = ident();
    expect("{");
    do {
      VarType t = type_name();
      std::string f = ident();
      expect(";");
      r.fields.emplace_back(f, t);
    } while (!is_punct("}"));
    expect("}");
    return r;
  }

  VarDecl var_decl() {
    VarDecl d;
    d.type = type_name();
    d.name = ident();
    expect(";");
    return d;
  }

  std::vector<Stmt> block() {
    expect("{");
    std::vector<Stmt> out;
    while (!is_punct("}")) {
      if (peek().kind == Token::Kind::End) fail(peek(), "expected '}'");
      out.push_back(stmt());
    }
    expect("}");
    return out;
  }

  Stmt stmt() {
    Stmt s;
    s.line = peek().line;
    s.loc = ++loc_;
    if (is_id("if")) {
      next();
      s.kind = Stmt::Kind::If;
      expect("(");
      s.expr = expr();
      expect(")");
      s.then_body = block();
      if (is_id("else")) {
        next();
        s.has_else = true;
        s.else_body = block();
      }
      return s;
    }
    if (is_id("while")) {
      next();
      s.kind = Stmt::Kind::While;
      s.loop_id = ++loops_;
      s.origin_loop = s.loop_id;
      expect("(");
      s.expr = expr();
      expect(")");
      s.then_body = block();
      return s;
    }
    if (is_id("free")) {
      next();
      s.kind = Stmt::Kind::Free;
      expect("(");
      s.expr = expr();
      expect(")");
      expect(";");
      return s;
    }
    if (is_id("assert") || is_id("assume")) {
      s.kind = is_id("assert") ? Stmt::Kind::Assert : Stmt::Kind::Assume;
      next();
      if (s.kind == Stmt::Kind::Assert) s.assert_id = ++asserts_;
      expect("(");
      s.expr = expr();
      expect(")");
      expect(";");
      return s;
    }
    if (is_id("skip")) {
      next();
      expect(";");
      s.kind = Stmt::Kind::Skip;
      return s;
    }
    s.lhs.var = ident();
    if (is_punct("->")) {
      next();
      s.lhs.field = ident();
    }
    expect("=");
    if (is_id("malloc")) {
      next();
      s.kind = Stmt::Kind::Malloc;
      expect("(");
      s.record = ident();
      expect(")");
      s.site_id = ++sites_;
    } else {
      s.kind = Stmt::Kind::Assign;
      s.expr = expr();
    }
    expect(";");
    return s;
  }

  static int precedence(const Token& t, BinOp& op) {
    if (t.kind != Token::Kind::Punct) return -1;
    static const std::map<std::string, std::pair<BinOp, int>> table = {
        {"||", {BinOp::Or, 1}}, {"&&", {BinOp::And, 2}}, {"==", {BinOp::Eq, 3}}, {"!=", {BinOp::Ne, 3}},
        {"<", {BinOp::Lt, 4}},  {"<=", {BinOp::Le, 4}},  {">", {BinOp::Gt, 4}},  {">=", {BinOp::Ge, 4}},
        {"+", {BinOp::Add, 5}}, {"-", {BinOp::Sub, 5}},  {"*", {BinOp::Mul, 6}}};
    auto it = table.find(t.text);
    if (it == table.end()) return -1;
    op = it->second.first;
    return it->second.second;
  }

  ExprPtr expr(int min_prec = 1) {
    ExprPtr lhs = unary();
    for (;;) {
      BinOp op{};
      int prec = precedence(peek(), op);
      if (prec < min_prec) return lhs;
      const Token& t = next();
      ExprPtr rhs = expr(prec + 1);
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Binary;
      e->binop = op;
      e->lhs = lhs;
      e->rhs = rhs;
      e->line = t.line;
      e->col = t.col;
      lhs = e;
    }
  }

  ExprPtr unary() {
    const Token& t = peek();
    if (is_punct("-") || is_punct("!")) {
      next();
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Unary;
      e->unop = t.text == "-" ? UnOp::Neg : UnOp::Not;
      e->lhs = unary();
      e->line = t.line;
      e->col = t.col;
      return e;
    }
    return primary();
  }

  ExprPtr primary() {
    const Token& t = peek();
    auto e = std::make_shared<Expr>();
    e->line = t.line;
    e->col = t.col;
    if (t.kind == Token::Kind::Int) {
      next();
      e->kind = Expr::Kind::IntLit;
      e->value = t.value;
      return e;
    }
    if (is_punct("(")) {
      next();
      ExprPtr inner = expr();
      expect(")");
      return inner;
    }
    if (is_id("NULL")) {
      next();
      e->kind = Expr::Kind::Null;
      return e;
    }
    if (is_id("nondet")) {
      next();
      expect("(");
      expect(")");
      e->kind = Expr::Kind::Nondet;
      return e;
    }
    if (t.kind == Token::Kind::Id && !kKeywords.count(t.text)) {
      e->name = ident();
      if (is_punct("->")) {
        next();
        e->kind = Expr::Kind::Field;
        e->field = ident();
      } else {
        e->kind = Expr::Kind::Var;
      }
      return e;
    }
    fail(t, "expected expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int loc_ = 0;
  int loops_ = 0;
  int sites_ = 0;
  int asserts_ = 0;
};

// ---------------------------------------------------------------------------
// Type checking

class Checker {
 public:
  explicit Checker(const Program& p) : p_(p) {}

  TypedProgram run() {
    std::set<std::string> names;
    for (const auto& r : p_.records) {
      if (!names.insert(r.name).second) throw TypeError(0, 0, "duplicate record '" + r.name + "'");
      std::set<std::string> fields;
      for (const auto& [f, t] : r.fields) {
        if (!fields.insert(f).second) throw TypeError(0, 0, "duplicate field '" + f + "' in record " + r.name);
      }
    }
    for (const auto& r : p_.records) {
      for (const auto& [f, t] : r.fields) {
        if (t.is_ptr() && !p_.record(t.record))
          throw TypeError(0, 0, "field '" + f + "' points to undeclared record '" + t.record + "'");
      }
    }
    std::set<std::string> vars;
    for (const auto& v : p_.vars) {
      if (!vars.insert(v.name).second) throw TypeError(0, 0, "duplicate variable '" + v.name + "'");
      if (v.type.is_ptr() && !p_.record(v.type.record))
        throw TypeError(0, 0, "variable '" + v.name + "' points to undeclared record '" + v.type.record + "'");
    }
    TypedProgram tp;
    tp.program.records = p_.records;
    tp.program.vars = p_.vars;
    tp.program.body = stmts(p_.body);
    return tp;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw TypeError(cur_loc_, cur_line_, msg); }

  std::vector<Stmt> stmts(const std::vector<Stmt>& in) {
    std::vector<Stmt> out;
    out.reserve(in.size());
    for (const auto& s : in) out.push_back(stmt(s));
    return out;
  }

  static ExprType of(const VarType& t) {
    return t.is_int() ? ExprType{ExprType::Kind::Int, ""} : ExprType{ExprType::Kind::Ptr, t.record};
  }

  VarType lvalue_type(const LValue& lv) {
    const VarDecl* v = p_.var(lv.var);
    if (!v) fail("undeclared variable '" + lv.var + "'");
    if (!lv.field) return v->type;
    if (!v->type.is_ptr()) fail("'" + lv.var + "' is not a pointer");
    const VarType* ft = p_.record(v->type.record)->field_type(*lv.field);
    if (!ft) fail("record " + v->type.record + " has no field '" + *lv.field + "'");
    return *ft;
  }

  static bool assignable(const VarType& to, const ExprType& from) {
    if (to.is_int()) return from.kind == ExprType::Kind::Int;
    if (from.kind == ExprType::Kind::Null) return true;
    return from.kind == ExprType::Kind::Ptr && from.record == to.record;
  }

  ExprPtr cond(const ExprPtr& e) {
    ExprPtr t = expr(e);
    if (t->type.kind != ExprType::Kind::Bool) fail("condition must be boolean: " + print_expr(*e));
    return t;
  }

  Stmt stmt(const Stmt& s) {
    cur_loc_ = s.loc;
    cur_line_ = s.line;
    Stmt out = s;
    switch (s.kind) {
      case Stmt::Kind::Assign: {
        VarType lt = lvalue_type(s.lhs);
        out.expr = expr(s.expr);
        if (!assignable(lt, out.expr->type)) fail("type mismatch in assignment to '" + s.lhs.var + "'");
        break;
      }
      case Stmt::Kind::Malloc: {
        VarType lt = lvalue_type(s.lhs);
        if (!p_.record(s.record)) fail("malloc of undeclared record '" + s.record + "'");
        if (!lt.is_ptr() || lt.record != s.record) fail("malloc(" + s.record + ") assigned to incompatible lvalue");
        break;
      }
      case Stmt::Kind::Free:
        out.expr = expr(s.expr);
        if (out.expr->type.kind != ExprType::Kind::Ptr && out.expr->type.kind != ExprType::Kind::Null)
          fail("free of a non-pointer expression");
        break;
      case Stmt::Kind::If:
        out.expr = cond(s.expr);
        out.then_body = stmts(s.then_body);
        out.else_body = stmts(s.else_body);
        break;
      case Stmt::Kind::While:
        out.expr = cond(s.expr);
        out.then_body = stmts(s.then_body);
        break;
      case Stmt::Kind::Assert:
      case Stmt::Kind::Assume:
        out.expr = cond(s.expr);
        break;
      case Stmt::Kind::Skip:
        break;
    }
    return out;
  }

  ExprPtr expr(const ExprPtr& in) {
    auto e = std::make_shared<Expr>(*in);
    using K = ExprType::Kind;
    switch (in->kind) {
      case Expr::Kind::IntLit:
      case Expr::Kind::Nondet:
        e->type = {K::Int, ""};
        break;
      case Expr::Kind::Null:
        e->type = {K::Null, ""};
        break;
      case Expr::Kind::Var: {
        const VarDecl* v = p_.var(in->name);
        if (!v) fail("undeclared variable '" + in->name + "'");
        e->type = of(v->type);
        break;
      }
      case Expr::Kind::Field: {
        LValue lv{in->name, in->field};
        e->type = of(lvalue_type(lv));
        break;
      }
      case Expr::Kind::Unary: {
        e->lhs = expr(in->lhs);
        if (in->unop == UnOp::Neg) {
          if (e->lhs->type.kind != K::Int) fail("unary '-' needs an int operand");
          e->type = {K::Int, ""};
        } else {
          if (e->lhs->type.kind != K::Bool) fail("'!' needs a boolean operand");
          e->type = {K::Bool, ""};
        }
        break;
      }
      case Expr::Kind::Binary: {
        e->lhs = expr(in->lhs);
        e->rhs = expr(in->rhs);
        const ExprType& a = e->lhs->type;
        const ExprType& b = e->rhs->type;
        switch (in->binop) {
          case BinOp::Add:
          case BinOp::Sub:
          case BinOp::Mul:
            if (a.kind != K::Int || b.kind != K::Int) fail("arithmetic on non-int operands: " + print_expr(*in));
            e->type = {K::Int, ""};
            break;
          case BinOp::Lt:
          case BinOp::Le:
          case BinOp::Gt:
          case BinOp::Ge:
            if (a.kind != K::Int || b.kind != K::Int) fail("ordering comparison on non-int operands: " + print_expr(*in));
            e->type = {K::Bool, ""};
            break;
          case BinOp::Eq:
          case BinOp::Ne: {
            bool ok = false;
            bool a_ptr = a.kind == K::Ptr || a.kind == K::Null;
            bool b_ptr = b.kind == K::Ptr || b.kind == K::Null;
            if (a.kind == K::Int && b.kind == K::Int) ok = true;
            if (a.kind == K::Bool && b.kind == K::Bool) ok = true;
            if (a_ptr && b_ptr) ok = a.kind == K::Null || b.kind == K::Null || a.record == b.record;
            if (!ok) fail("incompatible operands in comparison: " + print_expr(*in));
            e->type = {K::Bool, ""};
            break;
          }
          case BinOp::And:
          case BinOp::Or:
            if (a.kind != K::Bool || b.kind != K::Bool) fail("logical operator on non-boolean operands");
            e->type = {K::Bool, ""};
            break;
        }
        break;
      }
    }
    return e;
  }

  const Program& p_;
  Loc cur_loc_ = 0;
  int cur_line_ = 0;
};

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

std::string type_text(const VarType& t) { return t.is_int() ? "int" : t.record + "*"; }

void print_block(std::ostringstream& os, const std::vector<Stmt>& body, int indent);

void print_stmt(std::ostringstream& os, const Stmt& s, int indent) {
  std::string pad(indent * 2, ' ');
  auto lhs = [&] { return s.lhs.var + (s.lhs.field ? "->" + *s.lhs.field : ""); };
  switch (s.kind) {
    case Stmt::Kind::Assign: os << pad << lhs() << " = " << print_expr(*s.expr) << ";\n"; break;
    case Stmt::Kind::Malloc: os << pad << lhs() << " = malloc(" << s.record << ");\n"; break;
    case Stmt::Kind::Free: os << pad << "free(" << print_expr(*s.expr) << ");\n"; break;
    case Stmt::Kind::Assert: os << pad << "assert(" << print_expr(*s.expr) << ");\n"; break;
    case Stmt::Kind::Assume: os << pad << "assume(" << print_expr(*s.expr) << ");\n"; break;
    case Stmt::Kind::Skip: os << pad << "skip;\n"; break;
    case Stmt::Kind::If:
      os << pad << "if (" << print_expr(*s.expr) << ") {\n";
      print_block(os, s.then_body, indent + 1);
      os << pad << "}";
      if (s.has_else) {
        os << " else {\n";
        print_block(os, s.else_body, indent + 1);
        os << pad << "}";
      }
      os << "\n";
      break;
    case Stmt::Kind::While:
      os << pad << "while (" << print_expr(*s.expr) << ") {\n";
      print_block(os, s.then_body, indent + 1);
      os << pad << "}\n";
      break;
  }
}

void print_block(std::ostringstream& os, const std::vector<Stmt>& body, int indent) {
  for (const auto& s : body) print_stmt(os, s, indent);
}

}  // namespace

const VarType* RecordDecl::field_type(const std::string& f) const {
  for (const auto& [name, t] : fields)
    if (name == f) return &t;
  return nullptr;
}

const RecordDecl* Program::record(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

const VarDecl* Program::var(const std::string& name) const {
  for (const auto& v : vars)
    if (v.name == name) return &v;
  return nullptr;
}

int Program::malloc_sites() const {
  int n = 0;
  for_each_stmt(body, [&](const Stmt& s) { n = std::max(n, s.site_id); });
  return n;
}

int Program::loops() const {
  int n = 0;
  for_each_stmt(body, [&](const Stmt& s) { n = std::max(n, s.loop_id); });
  return n;
}

int Program::max_loc() const {
  int n = 0;
  for_each_stmt(body, [&](const Stmt& s) { n = std::max(n, s.loc); });
  return n;
}

bool same_expr(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::IntLit: return a.value == b.value;
    case Expr::Kind::Null:
    case Expr::Kind::Nondet: return true;
    case Expr::Kind::Var: return a.name == b.name;
    case Expr::Kind::Field: return a.name == b.name && a.field == b.field;
    case Expr::Kind::Unary: return a.unop == b.unop && same_expr(*a.lhs, *b.lhs);
    case Expr::Kind::Binary:
      return a.binop == b.binop && same_expr(*a.lhs, *b.lhs) && same_expr(*a.rhs, *b.rhs);
  }
  return false;
}

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Stmt& x = a[i];
    const Stmt& y = b[i];
    if (x.kind != y.kind || x.loc != y.loc || !(x.lhs == y.lhs) || x.record != y.record ||
        x.site_id != y.site_id || x.loop_id != y.loop_id || x.assert_id != y.assert_id || x.has_else != y.has_else)
      return false;
    if ((x.expr == nullptr) != (y.expr == nullptr)) return false;
    if (x.expr && !same_expr(*x.expr, *y.expr)) return false;
    if (!same_stmts(x.then_body, y.then_body) || !same_stmts(x.else_body, y.else_body)) return false;
  }
  return true;
}

bool same_program(const Program& a, const Program& b) {
  if (a.records.size() != b.records.size() || a.vars.size() != b.vars.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    if (a.records[i].name != b.records[i].name || a.records[i].fields != b.records[i].fields) return false;
  for (std::size_t i = 0; i < a.vars.size(); ++i)
    if (a.vars[i].name != b.vars[i].name || !(a.vars[i].type == b.vars[i].type)) return false;
  return same_stmts(a.body, b.body);
}

Program parse(const std::string& source) { return Parser(lex(source)).program(); }

TypedProgram typecheck(const Program& p) { return Checker(p).run(); }

std::string print_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntLit: return std::to_string(e.value);
    case Expr::Kind::Null: return "NULL";
    case Expr::Kind::Nondet: return "nondet()";
    case Expr::Kind::Var: return e.name;
    case Expr::Kind::Field: return e.name + "->" + e.field;
    case Expr::Kind::Unary: return std::string(e.unop == UnOp::Neg ? "-" : "!") + "(" + print_expr(*e.lhs) + ")";
    case Expr::Kind::Binary:
      return "(" + print_expr(*e.lhs) + " " + binop_text(e.binop) + " " + print_expr(*e.rhs) + ")";
  }
  return "?";
}

std::string print(const Program& p) {
  std::ostringstream os;
  for (const auto& r : p.records) {
    os << "record " << r.name << " {";
    for (const auto& [f, t] : r.fields) os << " " << type_text(t) << " " << f << ";";
    os << " }\n";
  }
  for (const auto& v : p.vars) os << type_text(v.type) << " " << v.name << ";\n";
  print_block(os, p.body, 0);
  return os.str();
}

std::string property_for_assert(int assert_id) { return "assert." + std::to_string(assert_id); }

}  // namespace kiki
