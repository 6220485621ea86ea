#pragma once

#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "memsim/circuit.hpp"
#include "memsim/linear.hpp"
#include "memsim/trace.hpp"

namespace memsim {

enum class Integrator { BackwardEuler, Trapezoidal };

/// Time-stepping and Newton tolerances. Defaults follow SPICE convention
/// scaled to the volt/milliamp signal levels this tool works at.
struct TransientConfig {
    double t_stop = 15e-3;
    double dt = 1e-6;
    double dt_min = 0.0; // 0: dt / 1024
    double dt_max = 0.0; // 0: dt (fixed grid) or a loose cap (adaptive)
    Integrator integrator = Integrator::Trapezoidal;
    double reltol = 1e-4;
    double abstol_voltage = 1e-6;  // V
    double abstol_current = 1e-9;  // A
    int max_newton_iters = 50;
    bool adaptive = false;

    /// Filled-in copy with defaults resolved; throws ConfigError on bad
    /// combinations (dt <= 0, t_stop <= 0, dt_min > dt, ...).
    TransientConfig normalized() const;
};

/// Unknown-vector layout: node voltages first, then one branch current per
/// current-carrying element (V, E, op-amp output, capacitor), then device
/// states (memristor x, op-amp lag).
struct UnknownLayout {
    std::vector<std::string> nodes;
    std::vector<std::string> branches;
    std::vector<std::string> states;

    size_t n_nodes() const { return nodes.size(); }
    size_t n_branches() const { return branches.size(); }
    size_t size() const { return nodes.size() + branches.size() + states.size(); }

    int node_slot(const std::string& name) const;    // -1 for ground ("0")
    int branch_slot(const std::string& element) const;
    int state_slot(const std::string& element) const;
};

/// One solved time point.
struct Solution {
    double t = 0.0;
    std::vector<double> u;
    std::shared_ptr<const UnknownLayout> layout;

    double v(const std::string& node) const;
    double i(const std::string& element) const;
    double state(const std::string& element) const;
};

/// Rail hints for multi-equilibrium DC points: op-amp element name -> +1/-1.
/// The hinted amps are first held at the chosen rail, then released.
using BiasHints = std::map<std::string, int>;

class Simulator {
  public:
    explicit Simulator(Circuit circuit, TransientConfig config = {});

    /// Newton from a flat start (or from rail-forced solutions when hints
    /// are given); escalates to gmin stepping and then source stepping.
    Solution dc_operating_point(const BiasHints& hints = {});

    enum class DcStrategy { Auto, PlainNewton, GminStepping, SourceStepping };
    Solution dc_operating_point(const BiasHints& hints, DcStrategy strategy);

    /// DC point, then time stepping to t_stop. Records every accepted step
    /// (plus the t = 0 point) into a TraceSet.
    TraceSet transient(const BiasHints& hints = {});

    const UnknownLayout& layout() const { return *layout_; }
    const Circuit& circuit() const { return circuit_; }
    const RunStats& stats() const { return stats_; }

  private:
    struct CompiledResistor { int a, b; double g; };
    struct CompiledCapacitor { int a, b; double c; std::optional<double> ic; int br; size_t hist; };
    struct CompiledVSource { int a, b; double volts; int br; };
    struct CompiledVcvs { int a, b; BoundExpr vol; int br; };
    struct CompiledVccs { int a, b; BoundExpr cur; };
    struct CompiledOpAmp { int out, inp, inn; OpAmpModel model; int br; int lag; size_t hist; };
    struct CompiledMemristor {
        std::string name;
        int plus, minus;
        MemristorParams prm;
        double x0;
        int xs;
        size_t hist;
    };

    /// Accepted point plus the integrator histories needed to take the
    /// next step. Copyable so adaptive control can retry from a snapshot.
    struct EngineState {
        double t = 0.0;
        std::vector<double> u;
        std::vector<double> cap_v, cap_i; // per capacitor
        std::vector<double> mem_xdot;     // per memristor
        std::vector<double> lag_sdot;     // per op-amp lag
    };

    enum class Mode { Dc, Step };
    enum class RowKind { NodeCurrent, BranchVoltage, BranchCurrent, State };

    struct AssemblyOpts {
        Mode mode = Mode::Dc;
        Integrator integrator = Integrator::Trapezoidal;
        double dt = 0.0;
        const EngineState* prev = nullptr;
        const std::map<size_t, int>* forced_rails = nullptr; // opamp idx -> rail
        double gmin = 0.0;
        double source_scale = 1.0;
    };

    void compile();
    void assemble(const std::vector<double>& u, const AssemblyOpts& opts, std::vector<double>& f,
                  DenseMatrix* jac) const;
    double row_tolerance(size_t row, const std::vector<double>& u) const;
    double weighted_residual(const std::vector<double>& f, const std::vector<double>& u) const;
    bool update_small(const std::vector<double>& du, const std::vector<double>& u) const;
    int newton(std::vector<double>& u, const AssemblyOpts& opts);
    EngineState initial_state(const Solution& dc) const;
    EngineState step(const EngineState& from, double dt);
    void record(TraceSet& traces, const EngineState& s) const;
    std::string worst_node(const std::vector<double>& f) const;
    Solution make_solution(double t, std::vector<double> u) const;

    Circuit circuit_;
    TransientConfig cfg_;
    std::shared_ptr<UnknownLayout> layout_;
    RunStats stats_;

    std::vector<CompiledResistor> resistors_;
    std::vector<CompiledCapacitor> capacitors_;
    std::vector<CompiledVSource> vsources_;
    std::vector<CompiledVcvs> vcvs_;
    std::vector<CompiledVccs> vccs_;
    std::vector<CompiledOpAmp> opamps_;
    std::vector<CompiledMemristor> memristors_;
    std::vector<RowKind> row_kinds_;
    std::map<std::string, size_t> opamp_by_name_;
    std::vector<std::pair<int, double>> node_ics_; // node slot -> voltage pinned during DC
};

} // namespace memsim
