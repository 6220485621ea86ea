#include "memsim/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "memsim/netlist.hpp" // parse_spice_number: one number grammar everywhere

namespace memsim {

ExprPtr Expr::number(double v) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Literal;
    e->literal = v;
    return e;
}

ExprPtr Expr::param(std::string name) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Param;
    e->name = std::move(name);
    return e;
}

ExprPtr Expr::node_v(std::string node) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::NodeV;
    e->name = std::move(node);
    return e;
}

ExprPtr Expr::branch_i(std::string element) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::BranchI;
    e->name = std::move(element);
    return e;
}

ExprPtr Expr::unary(ExprOp op, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(a);
    return e;
}

ExprPtr Expr::binary(ExprOp op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

// ---------------------------------------------------------------------------
// Lexing and recursive-descent parsing
// ---------------------------------------------------------------------------

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, LParen, RParen, Comma, End };

struct Token {
    Tok kind;
    std::string text; // lowercased
    double value = 0.0;
    int col = 0;
};

struct Lexer {
    std::string_view src;
    size_t pos = 0;

    Token next() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
        int col = static_cast<int>(pos) + 1;
        if (pos >= src.size()) return {Tok::End, "", 0.0, col};
        char c = src[pos];
        switch (c) {
            case '+': ++pos; return {Tok::Plus, "+", 0.0, col};
            case '-': ++pos; return {Tok::Minus, "-", 0.0, col};
            case '*': ++pos; return {Tok::Star, "*", 0.0, col};
            case '/': ++pos; return {Tok::Slash, "/", 0.0, col};
            case '(': ++pos; return {Tok::LParen, "(", 0.0, col};
            case ')': ++pos; return {Tok::RParen, ")", 0.0, col};
            case ',': ++pos; return {Tok::Comma, ",", 0.0, col};
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t start = pos;
            while (pos < src.size()) {
                char d = src[pos];
                if (std::isdigit(static_cast<unsigned char>(d)) || d == '.') { ++pos; continue; }
                // exponent: e/E followed by optional sign and digits
                if ((d == 'e' || d == 'E') && pos + 1 < src.size()) {
                    char n = src[pos + 1];
                    if (std::isdigit(static_cast<unsigned char>(n))) { pos += 2; continue; }
                    if ((n == '+' || n == '-') && pos + 2 < src.size() &&
                        std::isdigit(static_cast<unsigned char>(src[pos + 2]))) { pos += 3; continue; }
                }
                if (std::isalpha(static_cast<unsigned char>(d))) { ++pos; continue; } // magnitude suffix
                break;
            }
            std::string text(src.substr(start, pos - start));
            std::transform(text.begin(), text.end(), text.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            double v = parse_spice_number(text);
            return {Tok::Number, text, v, col};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos;
            while (pos < src.size()) {
                char d = src[pos];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') ++pos;
                else break;
            }
            std::string text(src.substr(start, pos - start));
            std::transform(text.begin(), text.end(), text.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
            return {Tok::Ident, text, 0.0, col};
        }
        throw ParseError(std::string("unexpected character '") + c + "' in expression", 0, col);
    }
};

struct Parser {
    Lexer lex;
    Token cur;

    explicit Parser(std::string_view text) : lex{text} { cur = lex.next(); }

    void advance() { cur = lex.next(); }

    void expect(Tok k, const char* what) {
        if (cur.kind != k) throw ParseError(std::string("expected ") + what, 0, cur.col);
        advance();
    }

    ExprPtr parse() {
        ExprPtr e = sum();
        if (cur.kind != Tok::End)
            throw ParseError("trailing input after expression", 0, cur.col);
        return e;
    }

    ExprPtr sum() {
        ExprPtr e = product();
        while (cur.kind == Tok::Plus || cur.kind == Tok::Minus) {
            ExprOp op = cur.kind == Tok::Plus ? ExprOp::Add : ExprOp::Sub;
            advance();
            e = Expr::binary(op, e, product());
        }
        return e;
    }

    ExprPtr product() {
        ExprPtr e = unary();
        while (cur.kind == Tok::Star || cur.kind == Tok::Slash) {
            ExprOp op = cur.kind == Tok::Star ? ExprOp::Mul : ExprOp::Div;
            advance();
            e = Expr::binary(op, e, unary());
        }
        return e;
    }

    ExprPtr unary() {
        if (cur.kind == Tok::Minus) {
            advance();
            return Expr::unary(ExprOp::Neg, unary());
        }
        if (cur.kind == Tok::Plus) {
            advance();
            return unary();
        }
        return primary();
    }

    // Inside v(...) / i(...) the argument is a bare name, which may be
    // purely numeric ("v(2)"), so read it as raw token text.
    std::string reference_name() {
        if (cur.kind != Tok::Ident && cur.kind != Tok::Number)
            throw ParseError("expected a node or element name", 0, cur.col);
        std::string name = cur.text;
        advance();
        return name;
    }

    ExprPtr primary() {
        if (cur.kind == Tok::Number) {
            double v = cur.value;
            advance();
            return Expr::number(v);
        }
        if (cur.kind == Tok::LParen) {
            advance();
            ExprPtr e = sum();
            expect(Tok::RParen, "')'");
            return e;
        }
        if (cur.kind == Tok::Ident) {
            std::string name = cur.text;
            int col = cur.col;
            advance();
            if (cur.kind != Tok::LParen) return Expr::param(name);
            advance(); // '('
            if (name == "v") {
                std::string ref = reference_name();
                expect(Tok::RParen, "')'");
                return Expr::node_v(ref);
            }
            if (name == "i") {
                std::string ref = reference_name();
                expect(Tok::RParen, "')'");
                return Expr::branch_i(ref);
            }
            if (name == "pow") {
                ExprPtr a = sum();
                expect(Tok::Comma, "','");
                ExprPtr b = sum();
                expect(Tok::RParen, "')'");
                return Expr::binary(ExprOp::Pow, a, b);
            }
            throw ParseError("unknown function '" + name + "'", 0, col);
        }
        throw ParseError("expected a value", 0, cur.col);
    }
};

} // namespace

ExprPtr parse_expression(std::string_view text) {
    Parser p(text);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Printing and structural comparison
// ---------------------------------------------------------------------------

namespace {

int precedence(ExprOp op) {
    switch (op) {
        case ExprOp::Add: case ExprOp::Sub: return 1;
        case ExprOp::Mul: case ExprOp::Div: return 2;
        case ExprOp::Neg: return 3;
        default: return 4;
    }
}

std::string format_literal(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void print(const ExprPtr& e, std::ostream& os, int parent_prec, bool right_side) {
    int prec = precedence(e->op);
    bool parens = prec < parent_prec || (prec == parent_prec && right_side && prec <= 2);
    if (parens) os << '(';
    switch (e->op) {
        case ExprOp::Literal: os << format_literal(e->literal); break;
        case ExprOp::Param: os << e->name; break;
        case ExprOp::NodeV: os << "v(" << e->name << ')'; break;
        case ExprOp::BranchI: os << "i(" << e->name << ')'; break;
        case ExprOp::Neg:
            os << '-';
            print(e->lhs, os, 3, false);
            break;
        case ExprOp::Pow:
            os << "pow(";
            print(e->lhs, os, 0, false);
            os << ',';
            print(e->rhs, os, 0, false);
            os << ')';
            break;
        case ExprOp::Add: case ExprOp::Sub: case ExprOp::Mul: case ExprOp::Div: {
            const char* sym = e->op == ExprOp::Add ? "+"
                            : e->op == ExprOp::Sub ? "-"
                            : e->op == ExprOp::Mul ? "*" : "/";
            print(e->lhs, os, prec, false);
            os << sym;
            print(e->rhs, os, prec, true);
            break;
        }
    }
    if (parens) os << ')';
}

} // namespace

std::string to_string(const ExprPtr& e) {
    std::ostringstream os;
    print(e, os, 0, false);
    return os.str();
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->op != b->op || a->literal != b->literal || a->name != b->name) return false;
    if (!!a->lhs != !!b->lhs || !!a->rhs != !!b->rhs) return false;
    if (a->lhs && !structurally_equal(a->lhs, b->lhs)) return false;
    if (a->rhs && !structurally_equal(a->rhs, b->rhs)) return false;
    return true;
}

bool depends_on_solution(const ExprPtr& e) {
    if (!e) return false;
    if (e->op == ExprOp::NodeV || e->op == ExprOp::BranchI) return true;
    return depends_on_solution(e->lhs) || depends_on_solution(e->rhs);
}

// ---------------------------------------------------------------------------
// Parameter substitution with constant folding
// ---------------------------------------------------------------------------

namespace {

double fold_binary(ExprOp op, double a, double b) {
    switch (op) {
        case ExprOp::Add: return a + b;
        case ExprOp::Sub: return a - b;
        case ExprOp::Mul: return a * b;
        case ExprOp::Div:
            if (b == 0.0) throw EvalError("division by zero in constant expression");
            return a / b;
        case ExprOp::Pow: return std::pow(a, b);
        default: throw EvalError("fold_binary: not a binary op");
    }
}

} // namespace

ExprPtr substitute_params(const ExprPtr& e, const std::map<std::string, double>& params,
                          bool strict) {
    switch (e->op) {
        case ExprOp::Literal:
        case ExprOp::NodeV:
        case ExprOp::BranchI:
            return e;
        case ExprOp::Param: {
            auto it = params.find(e->name);
            if (it != params.end()) return Expr::number(it->second);
            if (strict) throw EvalError("unresolved parameter '" + e->name + "'");
            return e;
        }
        case ExprOp::Neg: {
            ExprPtr a = substitute_params(e->lhs, params, strict);
            if (a->op == ExprOp::Literal) return Expr::number(-a->literal);
            return Expr::unary(ExprOp::Neg, a);
        }
        default: {
            ExprPtr a = substitute_params(e->lhs, params, strict);
            ExprPtr b = substitute_params(e->rhs, params, strict);
            if (a->op == ExprOp::Literal && b->op == ExprOp::Literal)
                return Expr::number(fold_binary(e->op, a->literal, b->literal));
            return Expr::binary(e->op, a, b);
        }
    }
}

ExprPtr rename_references(const ExprPtr& e, const std::map<std::string, std::string>& node_map,
                          const std::map<std::string, std::string>& element_map) {
    switch (e->op) {
        case ExprOp::Literal:
        case ExprOp::Param:
            return e;
        case ExprOp::NodeV: {
            auto it = node_map.find(e->name);
            return it != node_map.end() ? Expr::node_v(it->second) : e;
        }
        case ExprOp::BranchI: {
            auto it = element_map.find(e->name);
            return it != element_map.end() ? Expr::branch_i(it->second) : e;
        }
        case ExprOp::Neg:
            return Expr::unary(ExprOp::Neg, rename_references(e->lhs, node_map, element_map));
        default:
            return Expr::binary(e->op, rename_references(e->lhs, node_map, element_map),
                                rename_references(e->rhs, node_map, element_map));
    }
}

void collect_references(const ExprPtr& e, std::vector<std::string>& nodes,
                        std::vector<std::string>& elements) {
    if (!e) return;
    auto push_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    if (e->op == ExprOp::NodeV) push_unique(nodes, e->name);
    if (e->op == ExprOp::BranchI) push_unique(elements, e->name);
    collect_references(e->lhs, nodes, elements);
    collect_references(e->rhs, nodes, elements);
}

// ---------------------------------------------------------------------------
// Bound evaluation with derivatives
// ---------------------------------------------------------------------------

BoundExpr::BoundExpr(const ExprPtr& e, const Resolver& resolve) : root_(bind(e, resolve)) {}

BoundExpr::NodePtr BoundExpr::bind(const ExprPtr& e, const Resolver& resolve) {
    auto n = std::make_shared<Node>();
    n->op = e->op;
    n->literal = e->literal;
    switch (e->op) {
        case ExprOp::Literal: break;
        case ExprOp::Param:
            throw EvalError("unresolved parameter '" + e->name + "' reached the solver");
        case ExprOp::NodeV:
        case ExprOp::BranchI:
            n->slot = resolve(e->op, e->name); // -1 means ground / constant zero
            break;
        case ExprOp::Neg:
            n->lhs = bind(e->lhs, resolve);
            break;
        default:
            n->lhs = bind(e->lhs, resolve);
            n->rhs = bind(e->rhs, resolve);
            break;
    }
    return n;
}

namespace {

void add_scaled(std::vector<std::pair<int, double>>& out,
                const std::vector<std::pair<int, double>>& in, double scale) {
    for (const auto& [idx, d] : in) {
        bool found = false;
        for (auto& [oi, od] : out) {
            if (oi == idx) { od += scale * d; found = true; break; }
        }
        if (!found) out.emplace_back(idx, scale * d);
    }
}

} // namespace

ExprValue BoundExpr::eval_node(const Node& n, const std::vector<double>& u) {
    switch (n.op) {
        case ExprOp::Literal:
            return {n.literal, {}};
        case ExprOp::NodeV:
        case ExprOp::BranchI: {
            if (n.slot < 0) return {0.0, {}};
            ExprValue r;
            r.value = u[static_cast<size_t>(n.slot)];
            r.d.emplace_back(n.slot, 1.0);
            return r;
        }
        case ExprOp::Neg: {
            ExprValue a = eval_node(*n.lhs, u);
            ExprValue r;
            r.value = -a.value;
            add_scaled(r.d, a.d, -1.0);
            return r;
        }
        case ExprOp::Add: case ExprOp::Sub: {
            ExprValue a = eval_node(*n.lhs, u);
            ExprValue b = eval_node(*n.rhs, u);
            double s = n.op == ExprOp::Add ? 1.0 : -1.0;
            ExprValue r;
            r.value = a.value + s * b.value;
            r.d = std::move(a.d);
            add_scaled(r.d, b.d, s);
            return r;
        }
        case ExprOp::Mul: {
            ExprValue a = eval_node(*n.lhs, u);
            ExprValue b = eval_node(*n.rhs, u);
            ExprValue r;
            r.value = a.value * b.value;
            add_scaled(r.d, a.d, b.value);
            add_scaled(r.d, b.d, a.value);
            return r;
        }
        case ExprOp::Div: {
            ExprValue a = eval_node(*n.lhs, u);
            ExprValue b = eval_node(*n.rhs, u);
            ExprValue r;
            r.value = a.value / b.value;
            add_scaled(r.d, a.d, 1.0 / b.value);
            add_scaled(r.d, b.d, -a.value / (b.value * b.value));
            return r;
        }
        case ExprOp::Pow: {
            ExprValue a = eval_node(*n.lhs, u);
            ExprValue b = eval_node(*n.rhs, u);
            ExprValue r;
            r.value = std::pow(a.value, b.value);
            if (b.d.empty()) {
                // constant exponent: d = b * a^(b-1) * da
                add_scaled(r.d, a.d, b.value * std::pow(a.value, b.value - 1.0));
            } else {
                // general case, meaningful only for positive bases
                add_scaled(r.d, a.d, b.value * std::pow(a.value, b.value - 1.0));
                add_scaled(r.d, b.d, r.value * std::log(a.value));
            }
            return r;
        }
        case ExprOp::Param:
            break;
    }
    throw EvalError("BoundExpr: malformed node");
}

ExprValue BoundExpr::eval(const std::vector<double>& u) const {
    if (!root_) throw EvalError("BoundExpr: evaluating an empty expression");
    return eval_node(*root_, u);
}

NamedValue evaluate_expression(const ExprPtr& e, const std::map<std::string, double>& params,
                               const std::map<std::string, double>& node_voltages,
                               const std::map<std::string, double>& branch_currents) {
    ExprPtr folded = substitute_params(e, params, /*strict=*/true);

    std::vector<std::string> slot_keys;
    std::vector<double> u;
    auto resolver = [&](ExprOp kind, const std::string& name) -> int {
        if (kind == ExprOp::NodeV && name == "0") return -1;
        const auto& table = kind == ExprOp::NodeV ? node_voltages : branch_currents;
        auto it = table.find(name);
        if (it == table.end())
            throw EvalError(std::string(kind == ExprOp::NodeV ? "node '" : "element '") + name +
                            "' not present in the solution");
        std::string key = (kind == ExprOp::NodeV ? "v(" : "i(") + name + ")";
        for (size_t s = 0; s < slot_keys.size(); ++s)
            if (slot_keys[s] == key) return static_cast<int>(s);
        slot_keys.push_back(key);
        u.push_back(it->second);
        return static_cast<int>(slot_keys.size()) - 1;
    };

    BoundExpr bound(folded, resolver);
    ExprValue v = bound.eval(u);
    NamedValue out;
    out.value = v.value;
    for (const auto& [idx, d] : v.d) out.d[slot_keys[static_cast<size_t>(idx)]] = d;
    return out;
}

} // namespace memsim
