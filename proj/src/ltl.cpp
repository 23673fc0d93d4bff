#include "rltrans/ltl.hpp"

#include <cctype>
#include <map>
#include <unordered_map>

namespace rltrans {

namespace {

using Node = LtlFormula::Node;
using NodePtr = LtlFormula::NodePtr;
using Kind = LtlFormula::Kind;

NodePtr make(Kind kind, NodePtr l = nullptr, NodePtr r = nullptr, int atom = -1) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->atom = atom;
  n->left = std::move(l);
  n->right = std::move(r);
  return n;
}

}  // namespace

LtlFormula LtlFormula::tru() { return LtlFormula(make(Kind::True)); }
LtlFormula LtlFormula::atom(int prop_index) {
  return LtlFormula(make(Kind::Atom, nullptr, nullptr, prop_index));
}
LtlFormula LtlFormula::negate(const LtlFormula& f) {
  return LtlFormula(make(Kind::Not, f.root_));
}
LtlFormula LtlFormula::disjunction(const LtlFormula& a, const LtlFormula& b) {
  return LtlFormula(make(Kind::Or, a.root_, b.root_));
}
LtlFormula LtlFormula::conjunction(const LtlFormula& a, const LtlFormula& b) {
  return negate(disjunction(negate(a), negate(b)));
}
LtlFormula LtlFormula::implies(const LtlFormula& a, const LtlFormula& b) {
  return disjunction(negate(a), b);
}
LtlFormula LtlFormula::next(const LtlFormula& f) {
  return LtlFormula(make(Kind::Next, f.root_));
}
LtlFormula LtlFormula::until(const LtlFormula& a, const LtlFormula& b) {
  return LtlFormula(make(Kind::Until, a.root_, b.root_));
}
LtlFormula LtlFormula::eventually(const LtlFormula& f) { return until(tru(), f); }
LtlFormula LtlFormula::always(const LtlFormula& f) {
  return negate(until(tru(), negate(f)));
}
LtlFormula LtlFormula::from_node(NodePtr node) { return LtlFormula(std::move(node)); }

namespace {

int count_temporal(const NodePtr& n) {
  if (!n) return 0;
  int self = (n->kind == Kind::Next || n->kind == Kind::Until) ? 1 : 0;
  return self + count_temporal(n->left) + count_temporal(n->right);
}

bool propositional(const NodePtr& n) {
  if (!n) return true;
  if (n->kind == Kind::Next || n->kind == Kind::Until) return false;
  return propositional(n->left) && propositional(n->right);
}

bool eval_mask(const NodePtr& n, std::uint64_t mask) {
  switch (n->kind) {
    case Kind::True: return true;
    case Kind::Atom: return (mask >> n->atom) & 1;
    case Kind::Or: return eval_mask(n->left, mask) || eval_mask(n->right, mask);
    case Kind::Not: return !eval_mask(n->left, mask);
    default: throw std::logic_error("eval_on_mask on temporal formula");
  }
}

bool equal_nodes(const NodePtr& a, const NodePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->atom != b->atom) return false;
  return equal_nodes(a->left, b->left) && equal_nodes(a->right, b->right);
}

std::string print(const NodePtr& n, const std::vector<std::string>& props) {
  switch (n->kind) {
    case Kind::True: return "true";
    case Kind::Atom: return props.at(n->atom);
    case Kind::Not: return "!" + print(n->left, props);
    case Kind::Next: return "X " + print(n->left, props);
    case Kind::Or:
      return "(" + print(n->left, props) + " | " + print(n->right, props) + ")";
    case Kind::Until:
      return "(" + print(n->left, props) + " U " + print(n->right, props) + ")";
  }
  return "?";
}

}  // namespace

int LtlFormula::temporal_op_count() const { return count_temporal(root_); }
bool LtlFormula::is_propositional() const { return propositional(root_); }
bool LtlFormula::eval_on_mask(std::uint64_t mask) const { return eval_mask(root_, mask); }
bool LtlFormula::structurally_equal(const LtlFormula& other) const {
  return equal_nodes(root_, other.root_);
}
std::string LtlFormula::to_string(const std::vector<std::string>& propositions) const {
  return print(root_, propositions);
}

namespace {

struct Token {
  enum class Type { Ident, Bang, Pipe, Amp, Arrow, LParen, RParen, End };
  Type type;
  std::string text;
  int pos;
};

std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    int pos = static_cast<int>(i);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      out.push_back({Token::Type::Ident, text.substr(i, j - i), pos});
      i = j;
    } else if (c == '!') {
      out.push_back({Token::Type::Bang, "!", pos});
      ++i;
    } else if (c == '|') {
      out.push_back({Token::Type::Pipe, "|", pos});
      ++i;
    } else if (c == '&') {
      out.push_back({Token::Type::Amp, "&", pos});
      ++i;
    } else if (c == '-') {
      if (i + 1 >= text.size() || text[i + 1] != '>')
        throw LtlParseError(pos, "expected '->'");
      out.push_back({Token::Type::Arrow, "->", pos});
      i += 2;
    } else if (c == '(') {
      out.push_back({Token::Type::LParen, "(", pos});
      ++i;
    } else if (c == ')') {
      out.push_back({Token::Type::RParen, ")", pos});
      ++i;
    } else {
      throw LtlParseError(pos, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Token::Type::End, "", static_cast<int>(text.size())});
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const std::vector<std::string>& props)
      : tokens_(std::move(tokens)), props_(props) {}

  LtlFormula parse() {
    LtlFormula f = parse_implies();
    if (peek().type != Token::Type::End)
      throw LtlParseError(peek().pos, "unexpected trailing input '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }

  LtlFormula parse_implies() {
    LtlFormula left = parse_or();
    if (peek().type == Token::Type::Arrow) {
      take();
      return LtlFormula::implies(left, parse_implies());
    }
    return left;
  }

  LtlFormula parse_or() {
    LtlFormula f = parse_and();
    while (peek().type == Token::Type::Pipe) {
      take();
      f = LtlFormula::disjunction(f, parse_and());
    }
    return f;
  }

  LtlFormula parse_and() {
    LtlFormula f = parse_until();
    while (peek().type == Token::Type::Amp) {
      take();
      f = LtlFormula::conjunction(f, parse_until());
    }
    return f;
  }

  LtlFormula parse_until() {
    LtlFormula left = parse_unary();
    if (peek().type == Token::Type::Ident && peek().text == "U") {
      take();
      return LtlFormula::until(left, parse_until());  // right-associative
    }
    return left;
  }

  LtlFormula parse_unary() {
    const Token& t = peek();
    if (t.type == Token::Type::Bang) {
      take();
      return LtlFormula::negate(parse_unary());
    }
    if (t.type == Token::Type::Ident) {
      if (t.text == "X") {
        take();
        return LtlFormula::next(parse_unary());
      }
      if (t.text == "F") {
        take();
        return LtlFormula::eventually(parse_unary());
      }
      if (t.text == "G") {
        take();
        return LtlFormula::always(parse_unary());
      }
    }
    return parse_primary();
  }

  LtlFormula parse_primary() {
    Token t = take();
    switch (t.type) {
      case Token::Type::LParen: {
        LtlFormula f = parse_implies();
        if (peek().type != Token::Type::RParen)
          throw LtlParseError(peek().pos, "expected ')'");
        take();
        return f;
      }
      case Token::Type::Ident: {
        if (t.text == "true") return LtlFormula::tru();
        if (t.text == "false") return LtlFormula::negate(LtlFormula::tru());
        if (t.text == "U" || t.text == "X" || t.text == "F" || t.text == "G")
          throw LtlParseError(t.pos, "operator '" + t.text + "' needs an operand");
        for (std::size_t i = 0; i < props_.size(); ++i)
          if (props_[i] == t.text) return LtlFormula::atom(static_cast<int>(i));
        throw LtlParseError(t.pos, "unknown proposition '" + t.text + "'");
      }
      case Token::Type::RParen:
        throw LtlParseError(t.pos, "unbalanced ')'");
      case Token::Type::End:
        throw LtlParseError(t.pos, "unexpected end of input");
      default:
        throw LtlParseError(t.pos, "unexpected token '" + t.text + "'");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& props_;
};

}  // namespace

LtlFormula parse_ltl(const std::string& text,
                     const std::vector<std::string>& propositions) {
  return Parser(lex(text), propositions).parse();
}

void LassoWord::check() const {
  if (cycle.empty()) throw std::invalid_argument("lasso word cycle must be nonempty");
}

namespace {

// Satisfaction tables are computed bottom-up per subformula over the lasso
// of positions; results are shared across repeated subtrees.
struct LassoEval {
  const std::vector<std::uint64_t>& letters;
  int total;       // number of positions
  int wrap_to;     // successor of the last position
  std::unordered_map<const Node*, std::vector<char>> memo;

  int succ(int p) const { return p + 1 < total ? p + 1 : wrap_to; }

  const std::vector<char>& eval(const NodePtr& n) {
    auto it = memo.find(n.get());
    if (it != memo.end()) return it->second;
    std::vector<char> val(total, 0);
    switch (n->kind) {
      case Kind::True:
        val.assign(total, 1);
        break;
      case Kind::Atom:
        for (int p = 0; p < total; ++p) val[p] = (letters[p] >> n->atom) & 1;
        break;
      case Kind::Not: {
        const auto& sub = eval(n->left);
        for (int p = 0; p < total; ++p) val[p] = !sub[p];
        break;
      }
      case Kind::Or: {
        const auto& l = eval(n->left);
        const auto& r = eval(n->right);
        for (int p = 0; p < total; ++p) val[p] = l[p] || r[p];
        break;
      }
      case Kind::Next: {
        const auto& sub = eval(n->left);
        for (int p = 0; p < total; ++p) val[p] = sub[succ(p)];
        break;
      }
      case Kind::Until: {
        const auto& l = eval(n->left);
        const auto& r = eval(n->right);
        // Least fixpoint of val = r | (l & val o succ) on the lasso.
        bool changed = true;
        while (changed) {
          changed = false;
          for (int p = total - 1; p >= 0; --p) {
            char next = r[p] || (l[p] && val[succ(p)]);
            if (next != val[p]) {
              val[p] = next;
              changed = true;
            }
          }
        }
        break;
      }
    }
    return memo.emplace(n.get(), std::move(val)).first->second;
  }
};

}  // namespace

bool ltl_eval_lasso(const LtlFormula& formula, const LassoWord& word) {
  word.check();
  if (!formula.valid()) throw std::invalid_argument("empty formula");
  const int pre = static_cast<int>(word.prefix.size());
  const int cyc = static_cast<int>(word.cycle.size());
  const int copies = formula.temporal_op_count() + 1;
  const int total = pre + cyc * copies;

  std::vector<std::uint64_t> letters(total);
  for (int p = 0; p < total; ++p)
    letters[p] = p < pre ? word.prefix[p] : word.cycle[(p - pre) % cyc];

  LassoEval ev{letters, total, total - cyc, {}};
  return ev.eval(formula.root())[0] != 0;
}

}  // namespace rltrans
