#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "memsim/experiment.hpp" // hp_memristor_model_text
#include "memsim/netlist.hpp"

using namespace memsim;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(MEMSIM_FIXTURE_DIR) + "/" + name);
    REQUIRE_MESSAGE(in.good(), "fixture ", name, " must exist");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("fold_continuations joins the split device-model card") {
    std::string title;
    auto lines = fold_continuations(hp_memristor_model_text(), &title);
    CHECK(title == "******** HP memristor model ********");
    REQUIRE(lines.size() == 7);
    CHECK(lines[0].text ==
          ".subckt memristor plus minus ron=100 roff=16k rinit=1k d=10n uv=10f p=10");
    CHECK(lines[1].text.rfind("gx 0 x cur=", 0) == 0);
    CHECK(lines[0].line == 2);

    auto plain = fold_continuations("R1 1 0 1K\nR2 2 0 2K\n");
    REQUIRE(plain.size() == 2);
    CHECK(plain[0].text == "r1 1 0 1k");

    CHECK(fold_continuations("* only\n* comments\n").empty());
    CHECK_THROWS_AS(fold_continuations("+ nothing before me\n"), ParseError);
}

TEST_CASE("parse_spice_number magnitude suffixes") {
    CHECK(parse_spice_number("16K") == doctest::Approx(16000.0));
    CHECK(parse_spice_number("10N") == doctest::Approx(1e-8));
    CHECK(parse_spice_number("10F") == doctest::Approx(1e-14));
    CHECK(parse_spice_number("1T") == doctest::Approx(1e12));
    CHECK(parse_spice_number("2k") == doctest::Approx(2000.0));
    CHECK(parse_spice_number("1MEG") == doctest::Approx(1e6));
    CHECK(parse_spice_number("1m") == doctest::Approx(1e-3));
    CHECK(parse_spice_number("3.3u") == doctest::Approx(3.3e-6));
    CHECK(parse_spice_number("1e-8") == doctest::Approx(1e-8));
    CHECK(parse_spice_number("-4.5") == doctest::Approx(-4.5));
    CHECK(parse_spice_number("10ns") == doctest::Approx(1e-8)); // junk after suffix
    CHECK(parse_spice_number("5v") == doctest::Approx(5.0));     // unit letter, no scale
    CHECK(parse_spice_number(".5") == doctest::Approx(0.5));

    CHECK_THROWS_AS(parse_spice_number(""), ParseError);
    CHECK_THROWS_AS(parse_spice_number("k1"), ParseError);
    CHECK_THROWS_AS(parse_spice_number("1..2"), ParseError);
    CHECK_THROWS_AS(parse_spice_number("1k2"), ParseError);
    CHECK_THROWS_AS(parse_spice_number("nan"), ParseError);
}

TEST_CASE("parse_spice_number is case-insensitive") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> mant(0.1, 999.0);
    const char* suffixes[] = {"t", "g", "meg", "k", "m", "u", "n", "p", "f", ""};
    for (int k = 0; k < 300; ++k) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g%s", mant(rng), suffixes[k % 10]);
        std::string lower(buf), upper(buf);
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        CHECK(parse_spice_number(lower) == parse_spice_number(upper));
    }
}

TEST_CASE("the device-model fixture parses to the expected structure") {
    std::string text = read_fixture("hp_memristor.sp");
    CHECK(text == hp_memristor_model_text()); // embedded copy stays in sync

    NetlistDocument doc = parse_netlist(text);
    CHECK(doc.cards.empty());
    REQUIRE(doc.subckts.count("memristor") == 1);
    const SubcktDef& def = doc.subckts.at("memristor");
    CHECK(def.ports == std::vector<std::string>{"plus", "minus"});
    REQUIRE(def.params.size() == 6);

    std::map<std::string, double> expect{{"ron", 100.0}, {"roff", 16000.0}, {"rinit", 1000.0},
                                         {"d", 1e-8},    {"uv", 1e-14},    {"p", 10.0}};
    for (const auto& [key, expr] : def.params) {
        REQUIRE(expr->op == ExprOp::Literal);
        CHECK_MESSAGE(expr->literal == doctest::Approx(expect.at(key)).epsilon(1e-12),
                      "parameter ", key);
    }

    REQUIRE(def.cards.size() == 5);
    CHECK(std::holds_alternative<VccsCard>(def.cards[0]));
    CHECK(std::holds_alternative<CapacitorCard>(def.cards[1]));
    CHECK(std::holds_alternative<ResistorCard>(def.cards[2]));
    CHECK(std::holds_alternative<VcvsCard>(def.cards[3]));
    CHECK(std::holds_alternative<ResistorCard>(def.cards[4]));

    const auto& gx = std::get<VccsCard>(def.cards[0]);
    CHECK(gx.np == "0");
    CHECK(gx.nn == "x");
    const auto& cx = std::get<CapacitorCard>(def.cards[1]);
    CHECK(cx.value->literal == 1.0);
    REQUIRE(cx.ic);
    const auto& raux = std::get<ResistorCard>(def.cards[2]);
    CHECK(raux.value->literal == doctest::Approx(1e12));
    const auto& emem = std::get<VcvsCard>(def.cards[3]);
    CHECK(emem.np == "plus");
    CHECK(emem.nn == "aux");
    const auto& roff = std::get<ResistorCard>(def.cards[4]);
    CHECK(roff.name == "roff"); // card name and parameter name live in separate namespaces
    CHECK(roff.value->op == ExprOp::Param);
}

TEST_CASE("simple cards and directives") {
    NetlistDocument doc = parse_netlist("R1 1 0 1K\n");
    REQUIRE(doc.cards.size() == 1);
    const auto& r = std::get<ResistorCard>(doc.cards[0]);
    CHECK(r.n1 == "1");
    CHECK(r.value->literal == doctest::Approx(1000.0));

    CHECK(parse_netlist("").cards.empty());
    CHECK(parse_netlist("").subckts.empty());

    NetlistDocument rc = parse_netlist("Vin in 0 DC 5\n"
                                       "Rser in out 1k\n"
                                       "Cload out 0 1u IC=0\n"
                                       ".TRAN 1u 5m\n"
                                       ".IC V(out)=0\n"
                                       ".END\n");
    CHECK(rc.cards.size() == 3);
    CHECK(std::get<VSourceCard>(rc.cards[0]).volts == 5.0);
    REQUIRE(rc.trans.size() == 1);
    CHECK(rc.trans[0].tstep == doctest::Approx(1e-6));
    CHECK(rc.trans[0].tstop == doctest::Approx(5e-3));
    REQUIRE(rc.ics.size() == 1);
    CHECK(rc.ics[0].node == "out");

    NetlistDocument amp = parse_netlist("Xa out inp inn opamp gain=1e5 vsat=2.5\n");
    const auto& a = std::get<OpAmpCard>(amp.cards[0]);
    CHECK(a.model.open_loop_gain == doctest::Approx(1e5));
    CHECK(a.model.v_sat == doctest::Approx(2.5));
    CHECK_FALSE(a.model.has_pole());
}

TEST_CASE("parse errors carry a location") {
    CHECK_THROWS_AS(parse_netlist("Q1 1 0 model\n"), ParseError);       // unknown card letter
    CHECK_THROWS_AS(parse_netlist(".SUBCKT foo a\nR1 a 0 1k\n"), ParseError); // missing .ENDS
    CHECK_THROWS_AS(parse_netlist("R1 1 0 1k\nR1 1 0 2k\n"), ParseError);     // duplicate name
    CHECK_THROWS_AS(parse_netlist("R1 1 0\n"), ParseError);             // missing value
    CHECK_THROWS_AS(parse_netlist(".WEIRD 1 2\n"), ParseError);         // unknown directive
    CHECK_THROWS_AS(parse_netlist("X1 a b nosuch\n"), ParseError);      // unknown subcircuit
    CHECK_THROWS_AS(parse_netlist(".SUBCKT s a b\nR1 a b 1k\n.ENDS\nX1 n1 s\n"),
                    ParseError); // port arity
    CHECK_THROWS_AS(parse_netlist("Xa out inp opamp\n"), ParseError);   // opamp arity
    CHECK_THROWS_AS(parse_netlist("E1 a b 1.0\n"), ParseError);         // E needs VOL=

    try {
        parse_netlist("R1 1 0 1k\nR2 2 0 oops\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("round-trip: pretty_print then parse gives a structurally identical document") {
    const char* sources[] = {
        "R1 1 0 1K\nR2 1 2 'Rbase'\nV1 2 0 DC 5\n.TRAN 1u 1m\n",
        "* title line\nXa out inp inn opamp gain=1e5 vsat=2.5\nC1 out 0 2u IC=0.5\n",
        "G1 0 n CUR='2*V(n)-1'\nE1 n 0 VOL='-I(E1)*3'\nRl n 0 1k\n",
    };
    for (const char* s : sources) {
        NetlistDocument doc = parse_netlist(s);
        NetlistDocument round = parse_netlist(pretty_print(doc));
        CHECK_MESSAGE(structurally_equal(doc, round), "source:\n", s, "printed:\n",
                      pretty_print(doc));
    }
    NetlistDocument table = parse_netlist(hp_memristor_model_text());
    NetlistDocument round = parse_netlist(pretty_print(table));
    CHECK(structurally_equal(table, round));
    CHECK(round.title == table.title);
}
