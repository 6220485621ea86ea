#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "memsim/circuit.hpp"

namespace memsim {

/// Bookkeeping from one analysis run.
struct RunStats {
    size_t steps = 0;
    size_t newton_iterations = 0;
    size_t dt_halvings = 0;       // emergency subdivisions on the fixed grid
    size_t rejected_steps = 0;    // adaptive LTE rejections
    double max_kcl_residual = 0;  // max |node KCL| over accepted points, A
    double min_dt = 0;
    double max_dt = 0;
    std::string dc_strategy;      // "newton", "gmin", "source"
};

/// Named time-series signals sharing one strictly increasing time grid.
/// Raw signals are node voltages "v(n)", branch currents "i(el)" and
/// memristor states "x(el)"; "r(el)" memristances are derived on demand
/// through the registered probes.
class TraceSet {
  public:
    std::vector<double> time;

    void add_signal(std::string name);
    void push_sample(size_t signal_idx, double v) { data_[signal_idx].push_back(v); }

    bool has(const std::string& name) const;
    const std::vector<double>& signal(const std::string& name) const;
    size_t signal_count() const { return names_.size(); }
    const std::vector<std::string>& signal_names() const { return names_; }

    /// Selector lookup: "time", "v(node)", "i(elem)", "x(mem)", "r(mem)".
    /// Unknown selectors throw EvalError listing what is available.
    std::vector<double> probe(const std::string& selector) const;

    /// Every valid selector, derived ones included.
    std::vector<std::string> available() const;

    /// CSV with a header row "time,<signal>,...". An empty selector list
    /// exports every raw signal. 9 significant digits, '.' decimal point.
    void write_csv(std::ostream& os, const std::vector<std::string>& selectors = {}) const;

    std::vector<MemristorProbe> memristors;
    RunStats stats;

  private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> data_;
};

std::string format_csv_number(double v);

} // namespace memsim
