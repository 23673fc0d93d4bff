#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rltrans {

struct LtlParseError : std::runtime_error {
  LtlParseError(int pos, const std::string& message)
      : std::runtime_error("at position " + std::to_string(pos) + ": " + message),
        position(pos) {}
  int position;
};

/// LTL syntax tree over the core grammar: atoms, true, disjunction,
/// negation, Next, Until. Derived operators (F, G, conjunction,
/// implication) are expanded at construction time. Immutable.
class LtlFormula {
 public:
  enum class Kind { True, Atom, Or, Not, Next, Until };

  struct Node {
    Kind kind;
    int atom = -1;  // proposition index when kind == Atom
    std::shared_ptr<const Node> left, right;
  };
  using NodePtr = std::shared_ptr<const Node>;

  LtlFormula() = default;

  static LtlFormula tru();
  static LtlFormula atom(int prop_index);
  static LtlFormula negate(const LtlFormula& f);
  static LtlFormula disjunction(const LtlFormula& a, const LtlFormula& b);
  static LtlFormula conjunction(const LtlFormula& a, const LtlFormula& b);
  static LtlFormula implies(const LtlFormula& a, const LtlFormula& b);
  static LtlFormula next(const LtlFormula& f);
  static LtlFormula until(const LtlFormula& a, const LtlFormula& b);
  static LtlFormula eventually(const LtlFormula& f);  // true U f
  static LtlFormula always(const LtlFormula& f);      // !(true U !f)
  static LtlFormula from_node(NodePtr node);          // wrap an existing subtree

  const NodePtr& root() const { return root_; }
  bool valid() const { return root_ != nullptr; }

  // Number of temporal connectives (Next and Until nodes).
  int temporal_op_count() const;
  bool is_propositional() const;
  // Evaluates a temporal-free formula against a label bitmask.
  bool eval_on_mask(std::uint64_t mask) const;

  bool structurally_equal(const LtlFormula& other) const;
  std::string to_string(const std::vector<std::string>& propositions) const;

 private:
  explicit LtlFormula(NodePtr root) : root_(std::move(root)) {}
  NodePtr root_;
};

// Parses the concrete syntax: atoms are identifiers drawn from
// `propositions`; operators are !, |, &, ->, X, U, F, G with precedence
// (tightest first) {!, X, F, G}, then U (right-associative), &, |, ->.
// Parentheses group; `true` and `false` are constants. Throws LtlParseError
// with a position on any malformed input.
LtlFormula parse_ltl(const std::string& text,
                     const std::vector<std::string>& propositions);

/// Ultimately periodic label word: prefix then cycle, forever.
struct LassoWord {
  std::vector<std::uint64_t> prefix;
  std::vector<std::uint64_t> cycle;  // nonempty

  void check() const;
};

// Decides satisfaction of `formula` on the infinite word prefix . cycle^w.
// The word is unrolled to |prefix| + |cycle| * (temporal ops + 1) positions
// whose successor relation wraps one period back at the end; satisfaction
// tables are computed per subformula with Until as a least fixpoint on that
// lasso of positions.
bool ltl_eval_lasso(const LtlFormula& formula, const LassoWord& word);

}  // namespace rltrans
