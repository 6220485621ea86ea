#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "memsim/expr.hpp"

using namespace memsim;

TEST_CASE("parsing the device-model expressions") {
    ExprPtr e = parse_expression("pow(D,2)");
    REQUIRE(e->op == ExprOp::Pow);
    CHECK(e->lhs->op == ExprOp::Param);
    CHECK(e->lhs->name == "d");
    CHECK(e->rhs->op == ExprOp::Literal);
    CHECK(e->rhs->literal == 2.0);

    ExprPtr v = parse_expression("V(x)");
    REQUIRE(v->op == ExprOp::NodeV);
    CHECK(v->name == "x");

    ExprPtr one = parse_expression("1");
    REQUIRE(one->op == ExprOp::Literal);
    CHECK(one->literal == 1.0);

    ExprPtr g = parse_expression("(I(Emem)*(uv*Ron))/(pow(D,2))*(1-pow((2*V(x)-1),(2*p)))");
    CHECK(depends_on_solution(g));
    std::vector<std::string> nodes, elems;
    collect_references(g, nodes, elems);
    CHECK(nodes == std::vector<std::string>{"x"});
    CHECK(elems == std::vector<std::string>{"emem"});
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_expression("pow(1,2"), ParseError);
    CHECK_THROWS_AS(parse_expression("sin(1)"), ParseError);
    CHECK_THROWS_AS(parse_expression("1 + "), ParseError);
    CHECK_THROWS_AS(parse_expression("(1))"), ParseError);
    CHECK_THROWS_AS(parse_expression("1 ? 2"), ParseError);
}

TEST_CASE("print-and-reparse keeps structure") {
    const char* samples[] = {
        "(I(Emem)*(uv*Ron))/(pow(D,2))*(1-pow((2*V(x)-1),(2*p)))",
        "-I(Emem)*V(x)*(Roff-Ron)",
        "(Roff-Rinit)/(Roff-Ron)",
        "a-b+c",
        "a-(b+c)",
        "a/b/c",
        "a/(b*c)",
        "-(a+b)*-c",
        "1m+2k",
    };
    for (const char* s : samples) {
        ExprPtr e = parse_expression(s);
        ExprPtr round = parse_expression(to_string(e));
        CHECK_MESSAGE(structurally_equal(e, round), "sample: ", s, " printed: ", to_string(e));
    }
}

TEST_CASE("parameter substitution folds constant subtrees") {
    std::map<std::string, double> table1{{"ron", 100.0}, {"roff", 16e3}, {"rinit", 1e3},
                                         {"d", 1e-8},    {"uv", 1e-14}, {"p", 10.0}};
    ExprPtr ic = parse_expression("(Roff-Rinit)/(Roff-Ron)");
    ExprPtr folded = substitute_params(ic, table1);
    REQUIRE(folded->op == ExprOp::Literal);
    CHECK(folded->literal == doctest::Approx(15000.0 / 15900.0).epsilon(1e-15));

    ExprPtr gain = parse_expression("(uv*Ron)/pow(D,2)");
    ExprPtr gf = substitute_params(gain, table1);
    REQUIRE(gf->op == ExprOp::Literal);
    CHECK(gf->literal == doctest::Approx(1e4).epsilon(1e-12));

    CHECK_THROWS_AS(substitute_params(parse_expression("missing+1"), table1), EvalError);
}

TEST_CASE("evaluate_expression: table-1 controlled-source value and derivatives") {
    std::map<std::string, double> params{{"ron", 100.0}, {"roff", 16e3}};
    ExprPtr emem = parse_expression("-I(Emem)*V(x)*(Roff-Ron)");
    NamedValue r = evaluate_expression(emem, params, {{"x", 0.5}}, {{"emem", 1e-3}});
    CHECK(r.value == doctest::Approx(-7.95).epsilon(1e-12));
    CHECK(r.d.at("i(emem)") == doctest::Approx(-0.5 * 15900.0).epsilon(1e-12));
    CHECK(r.d.at("v(x)") == doctest::Approx(-1e-3 * 15900.0).epsilon(1e-12));

    NamedValue lit = evaluate_expression(parse_expression("3*4"), {}, {}, {});
    CHECK(lit.value == 12.0);
    CHECK(lit.d.empty());

    NamedValue va = evaluate_expression(parse_expression("V(a)"), {}, {{"a", 2.5}}, {});
    CHECK(va.value == 2.5);
    CHECK(va.d.at("v(a)") == 1.0);

    CHECK_THROWS_AS(evaluate_expression(parse_expression("V(nope)"), {}, {{"a", 1.0}}, {}),
                    EvalError);
}

TEST_CASE("analytic derivatives match central finite differences") {
    // random expression trees over two node voltages and one branch current
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_real_distribution<double> lit(0.5, 3.0);

    std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
        int choice = depth > 3 ? pick(rng) % 4 : pick(rng);
        switch (choice) {
            case 0: return Expr::number(lit(rng));
            case 1: return Expr::node_v("a");
            case 2: return Expr::node_v("b");
            case 3: return Expr::branch_i("e1");
            case 4: return Expr::binary(ExprOp::Add, gen(depth + 1), gen(depth + 1));
            case 5: return Expr::binary(ExprOp::Sub, gen(depth + 1), gen(depth + 1));
            case 6: return Expr::binary(ExprOp::Mul, gen(depth + 1), gen(depth + 1));
            case 7: // keep divisors away from zero
                return Expr::binary(ExprOp::Div, gen(depth + 1),
                                    Expr::binary(ExprOp::Add, Expr::number(2.0),
                                                 Expr::binary(ExprOp::Mul, Expr::number(0.1),
                                                              gen(depth + 1))));
            case 8: return Expr::unary(ExprOp::Neg, gen(depth + 1));
            default: // integer power of a shifted subexpression
                return Expr::binary(ExprOp::Pow,
                                    Expr::binary(ExprOp::Add, Expr::number(2.0),
                                                 Expr::binary(ExprOp::Mul, Expr::number(0.2),
                                                              gen(depth + 1))),
                                    Expr::number(static_cast<double>(1 + pick(rng) % 3)));
        }
    };

    std::uniform_real_distribution<double> point(-1.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        ExprPtr e = gen(0);
        double va = point(rng), vb = point(rng), ie = point(rng);
        auto value_at = [&](double a, double b, double i) {
            return evaluate_expression(e, {}, {{"a", a}, {"b", b}}, {{"e1", i}}).value;
        };
        NamedValue r = evaluate_expression(e, {}, {{"a", va}, {"b", vb}}, {{"e1", ie}});
        if (!std::isfinite(r.value) || std::abs(r.value) > 1e6) continue; // wildly scaled draw

        const double h = 1e-6;
        auto check_partial = [&](const std::string& key, double plus, double minus) {
            double fd = (plus - minus) / (2.0 * h);
            double an = r.d.count(key) ? r.d.at(key) : 0.0;
            double scale = std::max({std::abs(fd), std::abs(an), 1.0});
            CHECK(std::abs(fd - an) / scale < 1e-6);
        };
        check_partial("v(a)", value_at(va + h, vb, ie), value_at(va - h, vb, ie));
        check_partial("v(b)", value_at(va, vb + h, ie), value_at(va, vb - h, ie));
        check_partial("i(e1)", value_at(va, vb, ie + h), value_at(va, vb, ie - h));
        ++checked;
    }
    CHECK(checked > 150);
}
