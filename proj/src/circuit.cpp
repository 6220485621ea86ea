#include "memsim/circuit.hpp"

#include <algorithm>
#include <set>

namespace memsim {

const std::string& element_name(const FlatElement& e) {
    return std::visit([](const auto& k) -> const std::string& { return k.name; }, e);
}

int Circuit::node(const std::string& name) {
    if (name == "0") return -1;
    auto it = node_ids_.find(name);
    if (it != node_ids_.end()) return it->second;
    int id = static_cast<int>(node_names_.size());
    node_names_.push_back(name);
    node_ids_.emplace(name, id);
    return id;
}

int Circuit::find_node(const std::string& name) const {
    if (name == "0") return -1;
    auto it = node_ids_.find(name);
    if (it == node_ids_.end()) throw EvalError("unknown node '" + name + "'");
    return it->second;
}

bool Circuit::has_node(const std::string& name) const {
    return name == "0" || node_ids_.count(name) > 0;
}

void Circuit::add_element(FlatElement e) {
    const std::string& name = element_name(e);
    if (!element_index_.emplace(name, elements_.size()).second)
        throw AssemblyError("duplicate element name '" + name + "' after flattening");
    elements_.push_back(std::move(e));
}

void Circuit::add_resistor(const std::string& name, const std::string& a, const std::string& b,
                           double ohms) {
    add_element(FlatResistor{name, node(a), node(b), ohms});
}

void Circuit::add_capacitor(const std::string& name, const std::string& a, const std::string& b,
                            double farads, std::optional<double> ic) {
    add_element(FlatCapacitor{name, node(a), node(b), farads, ic});
}

void Circuit::add_vsource(const std::string& name, const std::string& plus,
                          const std::string& minus, double volts) {
    add_element(FlatVSource{name, node(plus), node(minus), volts});
}

void Circuit::add_vcvs(const std::string& name, const std::string& plus, const std::string& minus,
                       ExprPtr vol) {
    add_element(FlatVcvs{name, node(plus), node(minus), std::move(vol)});
}

void Circuit::add_vccs(const std::string& name, const std::string& plus, const std::string& minus,
                       ExprPtr cur) {
    add_element(FlatVccs{name, node(plus), node(minus), std::move(cur)});
}

void Circuit::add_opamp(const std::string& name, const std::string& out, const std::string& inp,
                        const std::string& inn, OpAmpModel model) {
    add_element(FlatOpAmp{name, node(out), node(inp), node(inn), model});
}

void Circuit::add_memristor(const std::string& name, const std::string& plus,
                            const std::string& minus, MemristorParams params, double x0) {
    params.validate();
    add_element(FlatMemristor{name, node(plus), node(minus), params, x0});
    memristor_probes_.push_back({name, params.r_on, params.r_off, "x(" + name + ")"});
}

void Circuit::check_connectivity() {
    const size_t n = node_names_.size();
    if (n == 0) return;
    // union nodes touched by the same element; ground lives in slot n
    std::vector<size_t> parent(n + 1);
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto slot = [&](int id) { return id < 0 ? n : static_cast<size_t>(id); };
    auto find = [&](size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    auto unite = [&](int a, int b) {
        size_t ra = find(slot(a)), rb = find(slot(b));
        if (ra != rb) parent[ra] = rb;
    };
    for (const FlatElement& e : elements_) {
        if (const auto* r = std::get_if<FlatResistor>(&e)) unite(r->a, r->b);
        else if (const auto* c = std::get_if<FlatCapacitor>(&e)) unite(c->a, c->b);
        else if (const auto* v = std::get_if<FlatVSource>(&e)) unite(v->a, v->b);
        else if (const auto* ev = std::get_if<FlatVcvs>(&e)) unite(ev->a, ev->b);
        else if (const auto* g = std::get_if<FlatVccs>(&e)) unite(g->a, g->b);
        else if (const auto* m = std::get_if<FlatMemristor>(&e)) unite(m->plus, m->minus);
        else if (const auto* op = std::get_if<FlatOpAmp>(&e)) {
            unite(op->out, op->inp);
            unite(op->out, op->inn);
        }
    }
    size_t ground_root = find(n);
    for (size_t i = 0; i < n; ++i) {
        if (find(i) != ground_root)
            warnings.push_back("node '" + node_names_[i] + "' is not reachable from ground");
    }
}

// ---------------------------------------------------------------------------
// Flattening
// ---------------------------------------------------------------------------

namespace {

struct Scope {
    std::string prefix;                              // "" at top level, else "inst."
    std::map<std::string, std::string> node_map;     // local name -> flat name
    std::map<std::string, std::string> element_map;  // local name -> flat name
    std::map<std::string, double> params;
    const std::set<std::string>* local_nodes = nullptr;   // names carded in this scope
    const std::set<std::string>* local_elements = nullptr;
};

std::set<std::string> carded_nodes(const std::vector<Card>& cards) {
    std::set<std::string> nodes;
    for (const Card& c : cards) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, ResistorCard> || std::is_same_v<T, CapacitorCard>) {
                    nodes.insert(k.n1);
                    nodes.insert(k.n2);
                } else if constexpr (std::is_same_v<T, VSourceCard> ||
                                     std::is_same_v<T, VcvsCard> ||
                                     std::is_same_v<T, VccsCard>) {
                    nodes.insert(k.np);
                    nodes.insert(k.nn);
                } else if constexpr (std::is_same_v<T, OpAmpCard>) {
                    nodes.insert(k.out);
                    nodes.insert(k.inp);
                    nodes.insert(k.inn);
                } else {
                    for (const auto& n : k.nodes) nodes.insert(n);
                }
            },
            c);
    }
    nodes.erase("0");
    return nodes;
}

std::set<std::string> carded_elements(const std::vector<Card>& cards) {
    std::set<std::string> names;
    for (const Card& c : cards) names.insert(card_name(c));
    return names;
}

/// Evaluate an expression that must reduce to a number once parameters are
/// substituted (element values, initial conditions, parameter overrides).
double to_number(const ExprPtr& e, const Scope& scope, const char* what, int line) {
    ExprPtr folded = substitute_params(e, scope.params, /*strict=*/true);
    if (folded->op != ExprOp::Literal)
        throw AssemblyError("line " + std::to_string(line) + ": " + std::string(what) +
                            " may reference parameters only");
    return folded->literal;
}

/// Substitute parameters and rename V()/I() references into flat names.
ExprPtr rewrite_control(const ExprPtr& e, const Scope& scope) {
    ExprPtr folded = substitute_params(e, scope.params, /*strict=*/true);
    return rename_references(folded, scope.node_map, scope.element_map);
}

struct Flattener {
    const NetlistDocument& doc;
    Circuit out;
    std::vector<std::string> instantiation_stack;

    std::string resolve_node(const Scope& scope, const std::string& local) {
        if (local == "0") return "0";
        auto it = scope.node_map.find(local);
        if (it != scope.node_map.end()) return it->second;
        return scope.prefix + local;
    }

    void expand(const std::vector<Card>& cards, const Scope& scope) {
        for (const Card& card : cards) {
            std::visit([&](const auto& k) { emit(k, scope); }, card);
        }
    }

    void emit(const ResistorCard& c, const Scope& s) {
        out.add_resistor(s.prefix + c.name, resolve_node(s, c.n1), resolve_node(s, c.n2),
                         to_number(c.value, s, "resistor value", c.loc.line));
    }

    void emit(const CapacitorCard& c, const Scope& s) {
        std::optional<double> ic;
        if (c.ic) ic = to_number(c.ic, s, "capacitor IC", c.loc.line);
        out.add_capacitor(s.prefix + c.name, resolve_node(s, c.n1), resolve_node(s, c.n2),
                          to_number(c.value, s, "capacitor value", c.loc.line), ic);
    }

    void emit(const VSourceCard& c, const Scope& s) {
        out.add_vsource(s.prefix + c.name, resolve_node(s, c.np), resolve_node(s, c.nn), c.volts);
    }

    void emit(const VcvsCard& c, const Scope& s) {
        out.add_vcvs(s.prefix + c.name, resolve_node(s, c.np), resolve_node(s, c.nn),
                     rewrite_control(c.vol, s));
    }

    void emit(const VccsCard& c, const Scope& s) {
        out.add_vccs(s.prefix + c.name, resolve_node(s, c.np), resolve_node(s, c.nn),
                     rewrite_control(c.cur, s));
    }

    void emit(const OpAmpCard& c, const Scope& s) {
        out.add_opamp(s.prefix + c.name, resolve_node(s, c.out), resolve_node(s, c.inp),
                      resolve_node(s, c.inn), c.model);
    }

    void emit(const SubcktInstanceCard& c, const Scope& s) {
        auto it = doc.subckts.find(c.subckt);
        if (it == doc.subckts.end())
            throw AssemblyError("instance '" + s.prefix + c.name +
                                "' references unknown subcircuit '" + c.subckt + "'");
        const SubcktDef& def = it->second;
        if (std::find(instantiation_stack.begin(), instantiation_stack.end(), def.name) !=
            instantiation_stack.end())
            throw AssemblyError("recursive instantiation of subcircuit '" + def.name + "'");
        if (def.ports.size() != c.nodes.size())
            throw AssemblyError("instance '" + s.prefix + c.name + "' connects " +
                                std::to_string(c.nodes.size()) + " nodes but '" + def.name +
                                "' has " + std::to_string(def.ports.size()) + " ports");

        Scope child;
        child.prefix = s.prefix + c.name + ".";

        // defaults first (evaluated against defaults already seen), then
        // instance overrides evaluated in the enclosing scope
        for (const auto& [key, expr] : def.params) {
            Scope tmp;
            tmp.params = child.params;
            child.params[key] = to_number(expr, tmp, "parameter default", def.loc.line);
        }
        for (const auto& [key, expr] : c.params) {
            if (!child.params.count(key))
                throw AssemblyError("instance '" + s.prefix + c.name +
                                    "' overrides unknown parameter '" + key + "'");
            child.params[key] = to_number(expr, s, "parameter override", c.loc.line);
        }

        std::set<std::string> locals = carded_nodes(def.cards);
        std::set<std::string> local_elems = carded_elements(def.cards);
        for (size_t i = 0; i < def.ports.size(); ++i)
            child.node_map[def.ports[i]] = resolve_node(s, c.nodes[i]);
        for (const std::string& n : locals) {
            if (!child.node_map.count(n)) child.node_map[n] = child.prefix + n;
        }
        for (const std::string& e : local_elems) child.element_map[e] = child.prefix + e;

        // reject control references that resolve to nothing in this scope
        for (const Card& cd : def.cards) {
            const ExprPtr* ctl = nullptr;
            if (const auto* ev = std::get_if<VcvsCard>(&cd)) ctl = &ev->vol;
            if (const auto* g = std::get_if<VccsCard>(&cd)) ctl = &g->cur;
            if (!ctl) continue;
            std::vector<std::string> nodes, elems;
            collect_references(*ctl, nodes, elems);
            for (const auto& n : nodes)
                if (n != "0" && !child.node_map.count(n))
                    throw AssemblyError("subcircuit '" + def.name + "': V(" + n +
                                        ") does not name a port or interior node");
            for (const auto& e : elems)
                if (!child.element_map.count(e))
                    throw AssemblyError("subcircuit '" + def.name + "': I(" + e +
                                        ") does not name an element of the subcircuit");
        }

        instantiation_stack.push_back(def.name);
        expand(def.cards, child);
        instantiation_stack.pop_back();

        // register a memristor probe when the instance follows the
        // state-on-a-node convention: parameters ron/roff plus an interior
        // node named "x" holding the normalized state
        auto ron = child.params.find("ron");
        auto roff = child.params.find("roff");
        if (ron != child.params.end() && roff != child.params.end() && locals.count("x")) {
            out.memristor_probes().push_back({s.prefix + c.name, ron->second, roff->second,
                                              "v(" + child.node_map.at("x") + ")"});
        }
    }
};

} // namespace

Circuit flatten(const NetlistDocument& doc, const std::map<std::string, double>& param_overrides) {
    Flattener fl{doc, Circuit{}, {}};

    Scope top;
    top.params = param_overrides;
    fl.expand(doc.cards, top);

    Circuit circuit = std::move(fl.out);

    // top-level control expressions must reference known nodes/elements
    std::set<std::string> names;
    for (const FlatElement& e : circuit.elements()) names.insert(element_name(e));
    for (const FlatElement& e : circuit.elements()) {
        const ExprPtr* ctl = nullptr;
        if (const auto* ev = std::get_if<FlatVcvs>(&e)) ctl = &ev->vol;
        if (const auto* g = std::get_if<FlatVccs>(&e)) ctl = &g->cur;
        if (!ctl) continue;
        std::vector<std::string> nodes, elems;
        collect_references(*ctl, nodes, elems);
        for (const auto& n : nodes)
            if (n != "0" && !circuit.has_node(n))
                throw AssemblyError("element '" + element_name(e) + "': V(" + n +
                                    ") references an unknown node");
        for (const auto& el : elems)
            if (!names.count(el))
                throw AssemblyError("element '" + element_name(e) + "': I(" + el +
                                    ") references an unknown element");
    }

    for (const IcDirective& ic : doc.ics) {
        if (!circuit.has_node(ic.node))
            throw AssemblyError(".IC references unknown node '" + ic.node + "'");
        circuit.node_ics.emplace_back(ic.node, ic.volts);
    }
    if (!doc.trans.empty()) circuit.tran = doc.trans.front();

    circuit.check_connectivity();
    return circuit;
}

} // namespace memsim
