#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "memsim/memristor.hpp"
#include "memsim/netlist.hpp"
#include "memsim/opamp.hpp"

namespace memsim {

// Flattened element instances. Node fields are circuit node ids with -1 for
// ground; expression-valued controls keep their flat reference names and are
// bound to unknown slots by the engine.

struct FlatResistor {
    std::string name;
    int a = -1, b = -1;
    double ohms = 0.0;
};

struct FlatCapacitor {
    std::string name;
    int a = -1, b = -1;
    double farads = 0.0;
    std::optional<double> ic; // initial voltage across (a, b)
};

struct FlatVSource {
    std::string name;
    int a = -1, b = -1;
    double volts = 0.0;
};

struct FlatVcvs {
    std::string name;
    int a = -1, b = -1;
    ExprPtr vol;
};

struct FlatVccs {
    std::string name;
    int a = -1, b = -1;
    ExprPtr cur;
};

struct FlatOpAmp {
    std::string name;
    int out = -1, inp = -1, inn = -1;
    OpAmpModel model;
};

struct FlatMemristor {
    std::string name;
    int plus = -1, minus = -1; // plus = marked terminal
    MemristorParams params;
    double x0 = 0.0;
};

using FlatElement = std::variant<FlatResistor, FlatCapacitor, FlatVSource, FlatVcvs, FlatVccs,
                                 FlatOpAmp, FlatMemristor>;

const std::string& element_name(const FlatElement& e);

/// Where to read a memristor's state from a trace, plus the resistance map
/// constants. Covers both the native device ("x(name)" signal) and a
/// subcircuit realization whose state lives on an interior node.
struct MemristorProbe {
    std::string name;     // instance name the r()/x() selectors use
    double r_on = 0.0;
    double r_off = 0.0;
    std::string x_signal; // "x(elem)" or "v(inst.x)"
};

/// Flat element graph ready for stamping. Node 0..n-1 are the non-ground
/// nodes; ground is id -1 under the name "0".
class Circuit {
  public:
    /// Name -> id, creating the node on first use. "0" is ground (-1).
    int node(const std::string& name);
    /// Name -> id without creating; throws EvalError for unknown names.
    int find_node(const std::string& name) const;
    bool has_node(const std::string& name) const;

    size_t node_count() const { return node_names_.size(); }
    const std::string& node_name(int id) const { return node_names_[static_cast<size_t>(id)]; }
    const std::vector<std::string>& node_names() const { return node_names_; }

    // builders used by the experiment layer and tests
    void add_resistor(const std::string& name, const std::string& a, const std::string& b,
                      double ohms);
    void add_capacitor(const std::string& name, const std::string& a, const std::string& b,
                       double farads, std::optional<double> ic = std::nullopt);
    void add_vsource(const std::string& name, const std::string& plus, const std::string& minus,
                     double volts);
    void add_vcvs(const std::string& name, const std::string& plus, const std::string& minus,
                  ExprPtr vol);
    void add_vccs(const std::string& name, const std::string& plus, const std::string& minus,
                  ExprPtr cur);
    void add_opamp(const std::string& name, const std::string& out, const std::string& inp,
                   const std::string& inn, OpAmpModel model);
    void add_memristor(const std::string& name, const std::string& plus, const std::string& minus,
                       MemristorParams params, double x0);

    void add_element(FlatElement e);

    const std::vector<FlatElement>& elements() const { return elements_; }
    const std::vector<MemristorProbe>& memristor_probes() const { return memristor_probes_; }
    std::vector<MemristorProbe>& memristor_probes() { return memristor_probes_; }

    std::vector<std::pair<std::string, double>> node_ics; // from .IC directives
    std::optional<TranDirective> tran;
    std::vector<std::string> warnings;

    /// Check node connectivity (non-ground nodes should reach ground through
    /// some element chain) and record warnings for stranded components.
    void check_connectivity();

  private:
    std::vector<std::string> node_names_;
    std::map<std::string, int> node_ids_;
    std::vector<FlatElement> elements_;
    std::map<std::string, size_t> element_index_;
    std::vector<MemristorProbe> memristor_probes_;
};

/// Expand subcircuit instances into a flat circuit. Hierarchical names are
/// joined with "."; instance parameter overrides win over subcircuit
/// defaults; expressions are partially evaluated where only parameters are
/// involved. `param_overrides` seeds the top-level parameter scope.
Circuit flatten(const NetlistDocument& doc,
                const std::map<std::string, double>& param_overrides = {});

} // namespace memsim
