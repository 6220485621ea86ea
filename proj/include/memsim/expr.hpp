#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memsim/errors.hpp"

namespace memsim {

enum class ExprOp {
    Literal,  // numeric constant
    Param,    // named parameter, resolved at flatten time
    NodeV,    // V(node)
    BranchI,  // I(element)
    Add, Sub, Mul, Div,
    Neg,      // unary minus
    Pow,      // pow(a, b)
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree. Shared subtrees are fine; nothing mutates
/// a node after construction.
struct Expr {
    ExprOp op = ExprOp::Literal;
    double literal = 0.0;
    std::string name;   // Param/NodeV/BranchI reference, canonical lowercase
    ExprPtr lhs, rhs;   // children; rhs empty for Neg

    static ExprPtr number(double v);
    static ExprPtr param(std::string name);
    static ExprPtr node_v(std::string node);
    static ExprPtr branch_i(std::string element);
    static ExprPtr unary(ExprOp op, ExprPtr a);
    static ExprPtr binary(ExprOp op, ExprPtr a, ExprPtr b);
};

/// Parse a quoted-expression body (without the quotes). Numbers accept
/// SPICE magnitude suffixes. Throws ParseError on malformed input.
ExprPtr parse_expression(std::string_view text);

/// Canonical text form; parse_expression(to_string(e)) reproduces e.
std::string to_string(const ExprPtr& e);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

/// True if the tree contains any V()/I() reference.
bool depends_on_solution(const ExprPtr& e);

/// Rewrite parameters to their bound values and fold every constant
/// subtree. `strict` demands that all parameters resolve.
ExprPtr substitute_params(const ExprPtr& e, const std::map<std::string, double>& params,
                          bool strict = true);

/// Rename V()/I() references through the supplied maps (used when a
/// subcircuit body is instantiated under a prefix). Names absent from a
/// map are left untouched.
ExprPtr rename_references(const ExprPtr& e, const std::map<std::string, std::string>& node_map,
                          const std::map<std::string, std::string>& element_map);

/// Collect the distinct V()/I() names in the tree.
void collect_references(const ExprPtr& e, std::vector<std::string>& nodes,
                        std::vector<std::string>& elements);

/// Value of an expression together with its exact first derivatives with
/// respect to every referenced unknown (by slot index).
struct ExprValue {
    double value = 0.0;
    std::vector<std::pair<int, double>> d; // (unknown index, partial)
};

/// Expression bound to concrete unknown-vector slots, ready for repeated
/// evaluation inside Newton iterations.
class BoundExpr {
  public:
    BoundExpr() = default;

    /// Resolver returns the unknown index for a node-voltage or
    /// branch-current name, or throws EvalError.
    using Resolver = std::function<int(ExprOp kind, const std::string& name)>;
    BoundExpr(const ExprPtr& e, const Resolver& resolve);

    ExprValue eval(const std::vector<double>& u) const;
    bool valid() const { return root_ != nullptr; }

  private:
    struct Node {
        ExprOp op;
        double literal = 0.0;
        int slot = -1;
        std::shared_ptr<const Node> lhs, rhs;
    };
    using NodePtr = std::shared_ptr<const Node>;

    static NodePtr bind(const ExprPtr& e, const Resolver& resolve);
    static ExprValue eval_node(const Node& n, const std::vector<double>& u);

    NodePtr root_;
};

/// One-shot convenience used by tests and the probe layer: evaluate with a
/// parameter environment and name-keyed solution values. Returns the value
/// and the partials keyed by reference name ("v(node)" / "i(elem)").
struct NamedValue {
    double value = 0.0;
    std::map<std::string, double> d;
};
NamedValue evaluate_expression(const ExprPtr& e, const std::map<std::string, double>& params,
                               const std::map<std::string, double>& node_voltages,
                               const std::map<std::string, double>& branch_currents);

} // namespace memsim
