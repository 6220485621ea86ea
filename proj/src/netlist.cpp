#include "memsim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace memsim {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

// ---------------------------------------------------------------------------
// Line folding
// ---------------------------------------------------------------------------

std::vector<LogicalLine> fold_continuations(std::string_view text, std::string* title) {
    if (title) title->clear();
    std::vector<LogicalLine> out;
    int lineno = 0;
    bool first_content_line = true;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                             : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '*') {
            if (first_content_line && title) *title = std::string(line);
            first_content_line = false;
            continue; // comment
        }
        first_content_line = false;
        if (line.front() == '+') {
            if (out.empty())
                throw ParseError("continuation line with nothing to continue", lineno);
            out.back().text += ' ';
            out.back().text += lowercase(trim(line.substr(1)));
            continue;
        }
        out.push_back({lowercase(line), lineno});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numbers
// ---------------------------------------------------------------------------

double parse_spice_number(std::string_view token) {
    std::string t = lowercase(trim(token));
    if (t.empty()) throw ParseError("empty numeric token");

    size_t i = 0;
    if (t[i] == '+' || t[i] == '-') ++i;
    size_t digits_start = i;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    bool have_int = i > digits_start;
    bool have_frac = false;
    if (i < t.size() && t[i] == '.') {
        ++i;
        size_t frac_start = i;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        have_frac = i > frac_start;
    }
    if (!have_int && !have_frac)
        throw ParseError("malformed numeric token '" + std::string(token) + "'");

    // optional exponent
    if (i < t.size() && t[i] == 'e') {
        size_t save = i;
        ++i;
        if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
        size_t exp_start = i;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i == exp_start) i = save; // "e" belonged to a suffix or junk, not an exponent
    }

    std::string prefix = t.substr(0, i);
    std::string rest = t.substr(i);
    if (!std::all_of(rest.begin(), rest.end(),
                     [](unsigned char c) { return std::isalpha(c); }))
        throw ParseError("malformed numeric token '" + std::string(token) + "'");

    int power = 0;
    if (!rest.empty()) {
        if (rest.rfind("meg", 0) == 0) power = 6;
        else {
            switch (rest[0]) {
                case 't': power = 12; break;
                case 'g': power = 9; break;
                case 'k': power = 3; break;
                case 'm': power = -3; break;
                case 'u': power = -6; break;
                case 'n': power = -9; break;
                case 'p': power = -12; break;
                case 'f': power = -15; break;
                default: power = 0; break; // unit letters like "v" or "ohm"
            }
        }
    }
    // fold the magnitude into the decimal exponent so the conversion is
    // correctly rounded ("10f" reads as 10e-15, not 10 * 1e-15)
    if (power != 0) {
        size_t e = prefix.find('e');
        if (e == std::string::npos) {
            prefix += "e" + std::to_string(power);
        } else {
            int exp = std::stoi(prefix.substr(e + 1));
            prefix = prefix.substr(0, e) + "e" + std::to_string(exp + power);
        }
    }
    return std::stod(prefix);
}

// ---------------------------------------------------------------------------
// Card tokenizer
// ---------------------------------------------------------------------------

namespace {

struct Field {
    std::string key;   // empty for positional fields
    std::string value; // quotes stripped
    bool quoted = false;
};

// Split a logical line into positional and key=value fields, honoring
// single-quoted spans (which may contain spaces and '=').
std::vector<Field> tokenize_card(const std::string& line, int lineno) {
    // first pass: raw tokens with quote awareness
    struct Raw { std::string text; };
    std::vector<std::string> raw;
    std::string cur;
    bool in_quote = false;
    for (char c : line) {
        if (c == '\'') { in_quote = !in_quote; cur += c; continue; }
        if (!in_quote && (c == ' ' || c == '\t')) {
            if (!cur.empty()) { raw.push_back(cur); cur.clear(); }
            continue;
        }
        cur += c;
    }
    if (in_quote) throw ParseError("unterminated quote", lineno);
    if (!cur.empty()) raw.push_back(cur);

    // normalize "key =", "= value", "key = value" spacings
    std::vector<std::string> merged;
    for (size_t i = 0; i < raw.size(); ++i) {
        std::string tok = raw[i];
        auto ends_eq = [](const std::string& s) { return !s.empty() && s.back() == '='; };
        auto starts_eq = [](const std::string& s) { return !s.empty() && s.front() == '='; };
        if (tok == "=" && !merged.empty() && i + 1 < raw.size()) {
            merged.back() += "=" + raw[++i];
            continue;
        }
        if (ends_eq(tok) && i + 1 < raw.size()) {
            merged.push_back(tok + raw[++i]);
            continue;
        }
        if (starts_eq(tok) && !merged.empty()) {
            merged.back() += tok;
            continue;
        }
        merged.push_back(tok);
    }

    std::vector<Field> fields;
    for (const std::string& tok : merged) {
        // find '=' outside quotes
        size_t eq = std::string::npos;
        bool q = false;
        for (size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == '\'') q = !q;
            else if (tok[i] == '=' && !q) { eq = i; break; }
        }
        Field f;
        std::string value = tok;
        if (eq != std::string::npos) {
            f.key = tok.substr(0, eq);
            value = tok.substr(eq + 1);
        }
        if (!value.empty() && value.front() == '\'') {
            if (value.size() < 2 || value.back() != '\'')
                throw ParseError("malformed quoted value", lineno);
            f.quoted = true;
            value = value.substr(1, value.size() - 2);
        }
        f.value = value;
        fields.push_back(std::move(f));
    }
    return fields;
}

ExprPtr field_expr(const Field& f, int lineno) {
    try {
        if (f.quoted) return parse_expression(f.value);
        return Expr::number(parse_spice_number(f.value));
    } catch (const ParseError& e) {
        throw ParseError(e.what(), lineno);
    }
}

double field_number(const Field& f, int lineno) {
    try {
        return parse_spice_number(f.value);
    } catch (const ParseError& e) {
        throw ParseError(e.what(), lineno);
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Card accessors
// ---------------------------------------------------------------------------

const std::string& card_name(const Card& c) {
    return std::visit([](const auto& k) -> const std::string& { return k.name; }, c);
}

SourceLoc card_loc(const Card& c) {
    return std::visit([](const auto& k) { return k.loc; }, c);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kOpAmpSubckt = "opamp";

Card parse_card(const LogicalLine& ll) {
    const int ln = ll.line;
    std::vector<Field> f = tokenize_card(ll.text, ln);
    if (f.empty()) throw ParseError("empty card", ln);
    if (!f[0].key.empty() || f[0].quoted)
        throw ParseError("expected an element name", ln);
    const std::string name = f[0].value;

    auto positional = [&](size_t idx, const char* what) -> const Field& {
        size_t seen = 0;
        for (size_t i = 1; i < f.size(); ++i) {
            if (!f[i].key.empty()) continue;
            if (seen == idx) return f[i];
            ++seen;
        }
        throw ParseError(std::string("missing ") + what + " on '" + name + "'", ln);
    };
    auto positional_count = [&]() {
        size_t n = 0;
        for (size_t i = 1; i < f.size(); ++i)
            if (f[i].key.empty()) ++n;
        return n;
    };
    auto keyed = [&](const char* key) -> const Field* {
        for (size_t i = 1; i < f.size(); ++i)
            if (f[i].key == key) return &f[i];
        return nullptr;
    };

    switch (name[0]) {
        case 'r': {
            if (positional_count() != 3)
                throw ParseError("resistor needs two nodes and a value", ln);
            ResistorCard c{name, positional(0, "node").value, positional(1, "node").value,
                           field_expr(positional(2, "value"), ln), {ln}};
            return c;
        }
        case 'c': {
            if (positional_count() != 3)
                throw ParseError("capacitor needs two nodes and a value", ln);
            CapacitorCard c{name, positional(0, "node").value, positional(1, "node").value,
                            field_expr(positional(2, "value"), ln), nullptr, {ln}};
            if (const Field* ic = keyed("ic")) c.ic = field_expr(*ic, ln);
            return c;
        }
        case 'v': {
            size_t npos = positional_count();
            // allow an optional literal "dc" keyword token before the value
            size_t vi = 2;
            if (npos == 4 && positional(2, "value").value == "dc") vi = 3;
            else if (npos != 3)
                throw ParseError("voltage source needs two nodes and a DC value", ln);
            VSourceCard c{name, positional(0, "node").value, positional(1, "node").value,
                          field_number(positional(vi, "value"), ln), {ln}};
            return c;
        }
        case 'e': {
            const Field* vol = keyed("vol");
            if (!vol || !vol->quoted)
                throw ParseError("E element requires VOL='expr'", ln);
            if (positional_count() != 2)
                throw ParseError("E element needs two nodes", ln);
            VcvsCard c{name, positional(0, "node").value, positional(1, "node").value,
                       field_expr(*vol, ln), {ln}};
            return c;
        }
        case 'g': {
            const Field* cur = keyed("cur");
            if (!cur || !cur->quoted)
                throw ParseError("G element requires CUR='expr'", ln);
            if (positional_count() != 2)
                throw ParseError("G element needs two nodes", ln);
            VccsCard c{name, positional(0, "node").value, positional(1, "node").value,
                       field_expr(*cur, ln), {ln}};
            return c;
        }
        case 'x': {
            size_t npos = positional_count();
            if (npos < 2)
                throw ParseError("subcircuit instance needs nodes and a subcircuit name", ln);
            std::vector<std::string> nodes;
            for (size_t i = 0; i + 1 < npos; ++i) nodes.push_back(positional(i, "node").value);
            std::string subckt = positional(npos - 1, "subcircuit name").value;

            if (subckt == kOpAmpSubckt) {
                if (nodes.size() != 3)
                    throw ParseError("the built-in opamp takes exactly three nodes "
                                     "(out, in+, in-)", ln);
                OpAmpCard c{name, nodes[0], nodes[1], nodes[2], OpAmpModel{}, {ln}};
                if (const Field* g = keyed("gain")) c.model.open_loop_gain = field_number(*g, ln);
                if (const Field* vs = keyed("vsat")) c.model.v_sat = field_number(*vs, ln);
                if (const Field* pl = keyed("pole")) c.model.pole_freq = field_number(*pl, ln);
                return c;
            }

            SubcktInstanceCard c{name, std::move(nodes), std::move(subckt), {}, {ln}};
            for (size_t i = 1; i < f.size(); ++i)
                if (!f[i].key.empty()) c.params.emplace_back(f[i].key, field_expr(f[i], ln));
            return c;
        }
        default:
            throw ParseError(std::string("unknown card type '") + name[0] + "' for '" + name + "'",
                             ln);
    }
}

} // namespace

NetlistDocument parse_netlist(std::string_view text) {
    NetlistDocument doc;
    std::vector<LogicalLine> lines = fold_continuations(text, &doc.title);

    SubcktDef* open_subckt = nullptr;
    SubcktDef pending;
    std::set<std::string> top_names;
    std::set<std::string> sub_names;

    for (const LogicalLine& ll : lines) {
        const int ln = ll.line;
        if (ll.text[0] == '.') {
            std::vector<Field> f = tokenize_card(ll.text, ln);
            const std::string& directive = f[0].value;

            if (directive == ".subckt") {
                if (open_subckt)
                    throw ParseError("nested .SUBCKT definitions are not supported", ln);
                if (f.size() < 2 || !f[1].key.empty())
                    throw ParseError(".SUBCKT needs a name", ln);
                pending = SubcktDef{};
                pending.loc = {ln};
                pending.name = f[1].value;
                for (size_t i = 2; i < f.size(); ++i) {
                    if (f[i].key.empty()) {
                        if (!pending.params.empty())
                            throw ParseError("subcircuit ports must precede parameter defaults",
                                             ln);
                        pending.ports.push_back(f[i].value);
                    } else {
                        pending.params.emplace_back(f[i].key, field_expr(f[i], ln));
                    }
                }
                if (doc.subckts.count(pending.name))
                    throw ParseError("duplicate subcircuit '" + pending.name + "'", ln);
                open_subckt = &pending;
                sub_names.clear();
                continue;
            }
            if (directive == ".ends") {
                if (!open_subckt) throw ParseError(".ENDS without .SUBCKT", ln);
                if (f.size() > 1 && f[1].value != open_subckt->name)
                    throw ParseError(".ENDS name does not match .SUBCKT", ln);
                doc.subckts.emplace(pending.name, std::move(pending));
                open_subckt = nullptr;
                continue;
            }
            if (open_subckt)
                throw ParseError("directive not allowed inside .SUBCKT", ln);
            if (directive == ".tran") {
                if (f.size() < 3)
                    throw ParseError(".TRAN needs a step and a stop time", ln);
                doc.trans.push_back({field_number(f[1], ln), field_number(f[2], ln), {ln}});
                continue;
            }
            if (directive == ".ic") {
                for (size_t i = 1; i < f.size(); ++i) {
                    const std::string& key = f[i].key;
                    if (key.size() < 4 || key.rfind("v(", 0) != 0 || key.back() != ')')
                        throw ParseError(".IC entries must look like V(node)=value", ln);
                    doc.ics.push_back(
                        {key.substr(2, key.size() - 3), field_number(f[i], ln), {ln}});
                }
                continue;
            }
            if (directive == ".end") continue;
            throw ParseError("unknown directive '" + directive + "'", ln);
        }

        Card card = parse_card(ll);
        std::set<std::string>& names = open_subckt ? sub_names : top_names;
        if (!names.insert(card_name(card)).second)
            throw ParseError("duplicate element name '" + card_name(card) + "'", ln);
        (open_subckt ? open_subckt->cards : doc.cards).push_back(std::move(card));
    }
    if (open_subckt)
        throw ParseError("missing .ENDS for subcircuit '" + open_subckt->name + "'",
                         open_subckt->loc.line);

    // every instance must reference a defined subcircuit with matching arity
    auto check_instances = [&](const std::vector<Card>& cards) {
        for (const Card& c : cards) {
            const auto* inst = std::get_if<SubcktInstanceCard>(&c);
            if (!inst) continue;
            auto it = doc.subckts.find(inst->subckt);
            if (it == doc.subckts.end())
                throw ParseError("instance '" + inst->name + "' references unknown subcircuit '" +
                                 inst->subckt + "'", inst->loc.line);
            if (it->second.ports.size() != inst->nodes.size())
                throw ParseError("instance '" + inst->name + "' connects " +
                                 std::to_string(inst->nodes.size()) + " nodes but '" +
                                 inst->subckt + "' has " +
                                 std::to_string(it->second.ports.size()) + " ports",
                                 inst->loc.line);
        }
    };
    check_instances(doc.cards);
    for (const auto& [name, def] : doc.subckts) check_instances(def.cards);

    return doc;
}

// ---------------------------------------------------------------------------
// Printing and equality
// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string expr_field(const ExprPtr& e) {
    if (e->op == ExprOp::Literal) return num(e->literal);
    return "'" + to_string(e) + "'";
}

struct CardPrinter {
    std::ostream& os;
    void operator()(const ResistorCard& c) {
        os << c.name << ' ' << c.n1 << ' ' << c.n2 << ' ' << expr_field(c.value) << '\n';
    }
    void operator()(const CapacitorCard& c) {
        os << c.name << ' ' << c.n1 << ' ' << c.n2 << ' ' << expr_field(c.value);
        if (c.ic) os << " ic=" << expr_field(c.ic);
        os << '\n';
    }
    void operator()(const VSourceCard& c) {
        os << c.name << ' ' << c.np << ' ' << c.nn << ' ' << num(c.volts) << '\n';
    }
    void operator()(const VcvsCard& c) {
        os << c.name << ' ' << c.np << ' ' << c.nn << " vol=" << expr_field(c.vol) << '\n';
    }
    void operator()(const VccsCard& c) {
        os << c.name << ' ' << c.np << ' ' << c.nn << " cur=" << expr_field(c.cur) << '\n';
    }
    void operator()(const OpAmpCard& c) {
        os << c.name << ' ' << c.out << ' ' << c.inp << ' ' << c.inn << ' ' << kOpAmpSubckt
           << " gain=" << num(c.model.open_loop_gain) << " vsat=" << num(c.model.v_sat);
        if (c.model.pole_freq > 0.0) os << " pole=" << num(c.model.pole_freq);
        os << '\n';
    }
    void operator()(const SubcktInstanceCard& c) {
        os << c.name;
        for (const auto& n : c.nodes) os << ' ' << n;
        os << ' ' << c.subckt;
        for (const auto& [k, v] : c.params) os << ' ' << k << '=' << expr_field(v);
        os << '\n';
    }
};

} // namespace

std::string pretty_print(const NetlistDocument& doc) {
    std::ostringstream os;
    if (!doc.title.empty()) os << doc.title << '\n';
    for (const auto& [name, def] : doc.subckts) {
        os << ".subckt " << def.name;
        for (const auto& p : def.ports) os << ' ' << p;
        for (const auto& [k, v] : def.params) os << ' ' << k << '=' << expr_field(v);
        os << '\n';
        CardPrinter printer{os};
        for (const Card& c : def.cards) std::visit(printer, c);
        os << ".ends\n";
    }
    CardPrinter printer{os};
    for (const Card& c : doc.cards) std::visit(printer, c);
    for (const auto& t : doc.trans) os << ".tran " << num(t.tstep) << ' ' << num(t.tstop) << '\n';
    for (const auto& ic : doc.ics) os << ".ic v(" << ic.node << ")=" << num(ic.volts) << '\n';
    return os.str();
}

namespace {

bool expr_equal_opt(const ExprPtr& a, const ExprPtr& b) {
    if (!a && !b) return true;
    if (!a || !b) return false;
    return structurally_equal(a, b);
}

bool params_equal(const std::vector<std::pair<std::string, ExprPtr>>& a,
                  const std::vector<std::pair<std::string, ExprPtr>>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || !structurally_equal(a[i].second, b[i].second))
            return false;
    return true;
}

} // namespace

bool structurally_equal(const Card& a, const Card& b) {
    if (a.index() != b.index()) return false;
    return std::visit(
        [&](const auto& ca) -> bool {
            using T = std::decay_t<decltype(ca)>;
            const auto& cb = std::get<T>(b);
            if constexpr (std::is_same_v<T, ResistorCard>) {
                return ca.name == cb.name && ca.n1 == cb.n1 && ca.n2 == cb.n2 &&
                       structurally_equal(ca.value, cb.value);
            } else if constexpr (std::is_same_v<T, CapacitorCard>) {
                return ca.name == cb.name && ca.n1 == cb.n1 && ca.n2 == cb.n2 &&
                       structurally_equal(ca.value, cb.value) && expr_equal_opt(ca.ic, cb.ic);
            } else if constexpr (std::is_same_v<T, VSourceCard>) {
                return ca.name == cb.name && ca.np == cb.np && ca.nn == cb.nn &&
                       ca.volts == cb.volts;
            } else if constexpr (std::is_same_v<T, VcvsCard>) {
                return ca.name == cb.name && ca.np == cb.np && ca.nn == cb.nn &&
                       structurally_equal(ca.vol, cb.vol);
            } else if constexpr (std::is_same_v<T, VccsCard>) {
                return ca.name == cb.name && ca.np == cb.np && ca.nn == cb.nn &&
                       structurally_equal(ca.cur, cb.cur);
            } else if constexpr (std::is_same_v<T, OpAmpCard>) {
                return ca.name == cb.name && ca.out == cb.out && ca.inp == cb.inp &&
                       ca.inn == cb.inn &&
                       ca.model.open_loop_gain == cb.model.open_loop_gain &&
                       ca.model.v_sat == cb.model.v_sat &&
                       ca.model.pole_freq == cb.model.pole_freq;
            } else {
                const auto& ia = ca;
                const auto& ib = cb;
                return ia.name == ib.name && ia.nodes == ib.nodes && ia.subckt == ib.subckt &&
                       params_equal(ia.params, ib.params);
            }
        },
        a);
}

bool structurally_equal(const NetlistDocument& a, const NetlistDocument& b) {
    if (a.cards.size() != b.cards.size() || a.subckts.size() != b.subckts.size() ||
        a.trans.size() != b.trans.size() || a.ics.size() != b.ics.size())
        return false;
    for (size_t i = 0; i < a.cards.size(); ++i)
        if (!structurally_equal(a.cards[i], b.cards[i])) return false;
    for (const auto& [name, da] : a.subckts) {
        auto it = b.subckts.find(name);
        if (it == b.subckts.end()) return false;
        const SubcktDef& db = it->second;
        if (da.ports != db.ports || !params_equal(da.params, db.params) ||
            da.cards.size() != db.cards.size())
            return false;
        for (size_t i = 0; i < da.cards.size(); ++i)
            if (!structurally_equal(da.cards[i], db.cards[i])) return false;
    }
    for (size_t i = 0; i < a.trans.size(); ++i)
        if (a.trans[i].tstep != b.trans[i].tstep || a.trans[i].tstop != b.trans[i].tstop)
            return false;
    for (size_t i = 0; i < a.ics.size(); ++i)
        if (a.ics[i].node != b.ics[i].node || a.ics[i].volts != b.ics[i].volts) return false;
    return true;
}

} // namespace memsim
