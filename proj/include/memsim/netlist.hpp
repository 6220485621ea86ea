#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "memsim/expr.hpp"
#include "memsim/opamp.hpp"

namespace memsim {

// ---------------------------------------------------------------------------
// Cards
// ---------------------------------------------------------------------------
// One statement of the accepted SPICE subset. Names and node identifiers are
// stored in canonical lowercase; "0" is ground. Value fields are expression
// trees so that quoted parameter expressions ('Roff') survive parsing.

struct SourceLoc {
    int line = 0;
};

struct ResistorCard {
    std::string name, n1, n2;
    ExprPtr value;
    SourceLoc loc;
};

struct CapacitorCard {
    std::string name, n1, n2;
    ExprPtr value;
    ExprPtr ic; // initial voltage, optional
    SourceLoc loc;
};

struct VSourceCard {
    std::string name, np, nn;
    double volts = 0.0;
    SourceLoc loc;
};

struct VcvsCard { // E element, VOL='expr'
    std::string name, np, nn;
    ExprPtr vol;
    SourceLoc loc;
};

struct VccsCard { // G element, CUR='expr'
    std::string name, np, nn;
    ExprPtr cur;
    SourceLoc loc;
};

struct OpAmpCard { // X element on the reserved subcircuit name "opamp"
    std::string name, out, inp, inn;
    OpAmpModel model;
    SourceLoc loc;
};

struct SubcktInstanceCard { // X element
    std::string name;
    std::vector<std::string> nodes;
    std::string subckt;
    std::vector<std::pair<std::string, ExprPtr>> params;
    SourceLoc loc;
};

using Card = std::variant<ResistorCard, CapacitorCard, VSourceCard, VcvsCard, VccsCard,
                          OpAmpCard, SubcktInstanceCard>;

const std::string& card_name(const Card& c);
SourceLoc card_loc(const Card& c);

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

struct SubcktDef {
    std::string name;
    std::vector<std::string> ports;
    std::vector<std::pair<std::string, ExprPtr>> params; // defaults, in card order
    std::vector<Card> cards;
    SourceLoc loc;
};

struct TranDirective {
    double tstep = 0.0;
    double tstop = 0.0;
    SourceLoc loc;
};

struct IcDirective {
    std::string node;
    double volts = 0.0;
    SourceLoc loc;
};

struct NetlistDocument {
    std::string title; // leading comment line, verbatim, when present
    std::vector<Card> cards;
    std::map<std::string, SubcktDef> subckts;
    std::vector<TranDirective> trans;
    std::vector<IcDirective> ics;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct LogicalLine {
    std::string text;
    int line = 0; // 1-based physical line of the first fragment
};

/// Strip comments, join "+" continuation lines, lowercase. The unfolded
/// leading comment, if any, is reported separately as the title.
std::vector<LogicalLine> fold_continuations(std::string_view text, std::string* title = nullptr);

/// Numeric token with optional SPICE magnitude suffix, case-insensitive:
/// t=1e12 g=1e9 meg=1e6 k=1e3 m=1e-3 u=1e-6 n=1e-9 p=1e-12 f=1e-15.
/// Trailing letters after a recognized suffix are ignored ("10ns" = 1e-8).
double parse_spice_number(std::string_view token);

NetlistDocument parse_netlist(std::string_view text);

/// Canonical text form: reparsing it yields a structurally identical
/// document (title excepted only when the original had none).
std::string pretty_print(const NetlistDocument& doc);

bool structurally_equal(const Card& a, const Card& b);
bool structurally_equal(const NetlistDocument& a, const NetlistDocument& b);

} // namespace memsim
