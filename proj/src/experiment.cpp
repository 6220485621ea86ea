#include "memsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace memsim {

namespace {

constexpr std::string_view kHpModel =
    "******** HP memristor model ********\n"
    ".SUBCKT memristor Plus Minus\n"
    "+ Ron=100 Roff=16K Rinit=1K D=10N uv=10F p=10\n"
    "Gx 0 x CUR='(I(Emem)*(uv*Ron))/(pow(D,2))*(1-pow((2*V(x)-1),(2*p)))'\n"
    "Cx x 0 1 IC='(Roff-Rinit)/(Roff-Ron)'\n"
    "Raux x 0 1T\n"
    "Emem plus aux VOL='-I(Emem)*V(x)*(Roff-Ron)'\n"
    "Roff aux minus 'Roff'\n"
    ".ENDS\n";

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string_view hp_memristor_model_text() { return kHpModel; }

void ExperimentSpec::validate() const {
    memristor.validate();
    if (!(r_ref > 0.0) || !(r1 > 0.0) || !(r2 > 0.0))
        throw ConfigError("experiment: resistances must be positive");
    if (!(supply > 0.0)) throw ConfigError("experiment: supply must be positive");
    if (!(r_ref >= memristor.r_on && r_ref <= memristor.r_off))
        throw ConfigError("experiment: r_ref must lie within [r_on, r_off] to be reachable");
    if (kind == ExperimentKind::Increase && !(r_ref > memristor.r_init))
        throw ConfigError("increase experiment needs r_ref > r_init; this loop only raises "
                          "the memristance (use the decrease circuit instead)");
    if (kind == ExperimentKind::Decrease && !(r_ref < memristor.r_init))
        throw ConfigError("decrease experiment needs r_ref < r_init; this loop only lowers "
                          "the memristance (use the increase circuit instead)");
}

// ---------------------------------------------------------------------------
// Circuit builders
// ---------------------------------------------------------------------------
//
// Both loops share the node naming v1 (op-amp output), v2 (sense node,
// noninverting input) and v3 (R1/R2 divider, inverting input). With R1 = R2
// the divider pins v3 = v1/2; the sense divider puts v2 above or below v1/2
// depending on sgn(R_ref - R_mem), so the latched output drives the
// memristance toward R_ref and the loop releases at v2 = v3.
//
// increase: v1 --[memristor >]-- v2 --[R_ref]-- gnd   (marked side at v2)
// decrease: v1 --[R_ref]-- v2 --[> memristor]-- gnd   (marked side at v2)

namespace {

OpAmpModel amp_model(const ExperimentSpec& spec) {
    OpAmpModel m;
    m.open_loop_gain = spec.opamp_gain;
    m.v_sat = spec.supply;
    m.pole_freq = spec.opamp_pole_hz;
    return m;
}

void add_divider_and_amp(Circuit& c, const ExperimentSpec& spec) {
    c.add_resistor("r1", "v1", "v3", spec.r1);
    c.add_resistor("r2", "v3", "0", spec.r2);
    c.add_opamp("xamp", "v1", "v2", "v3", amp_model(spec));
}

Circuit build_subckt_realization(const ExperimentSpec& spec) {
    const MemristorParams& m = spec.memristor;
    std::ostringstream net;
    net << "* resistance-programming loop (subcircuit memristor)\n"
        << kHpModel;
    if (spec.kind == ExperimentKind::Increase) {
        net << "xmem v2 v1 memristor ron=" << fmt(m.r_on) << " roff=" << fmt(m.r_off)
            << " rinit=" << fmt(m.r_init) << " d=" << fmt(m.d) << " uv=" << fmt(m.mu_v)
            << " p=" << m.p << "\n"
            << "rref v2 0 " << fmt(spec.r_ref) << "\n";
    } else {
        net << "rref v1 v2 " << fmt(spec.r_ref) << "\n"
            << "xmem v2 0 memristor ron=" << fmt(m.r_on) << " roff=" << fmt(m.r_off)
            << " rinit=" << fmt(m.r_init) << " d=" << fmt(m.d) << " uv=" << fmt(m.mu_v)
            << " p=" << m.p << "\n";
    }
    net << "r1 v1 v3 " << fmt(spec.r1) << "\n"
        << "r2 v3 0 " << fmt(spec.r2) << "\n"
        << "xamp v1 v2 v3 opamp gain=" << fmt(spec.opamp_gain) << " vsat=" << fmt(spec.supply);
    if (spec.opamp_pole_hz > 0.0) net << " pole=" << fmt(spec.opamp_pole_hz);
    net << "\n";
    return flatten(parse_netlist(net.str()));
}

} // namespace

Circuit build_increase_circuit(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::Increase)
        throw ConfigError("build_increase_circuit: spec.kind is not 'increase'");
    spec.validate();
    if (spec.realization == MemristorRealization::Subckt) return build_subckt_realization(spec);

    Circuit c;
    double x0 = x_from_resistance(spec.memristor.r_init, spec.memristor);
    c.add_memristor("xmem", "v2", "v1", spec.memristor, x0);
    c.add_resistor("rref", "v2", "0", spec.r_ref);
    add_divider_and_amp(c, spec);
    c.check_connectivity();
    return c;
}

Circuit build_decrease_circuit(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::Decrease)
        throw ConfigError("build_decrease_circuit: spec.kind is not 'decrease'");
    spec.validate();
    if (spec.realization == MemristorRealization::Subckt) return build_subckt_realization(spec);

    Circuit c;
    double x0 = x_from_resistance(spec.memristor.r_init, spec.memristor);
    c.add_resistor("rref", "v1", "v2", spec.r_ref);
    c.add_memristor("xmem", "v2", "0", spec.memristor, x0);
    add_divider_and_amp(c, spec);
    c.check_connectivity();
    return c;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double settling_time(const std::vector<double>& time, const std::vector<double>& r, double target,
                     double band) {
    if (time.empty() || time.size() != r.size())
        throw ConfigError("settling_time: empty or mismatched trace");
    if (!(band > 0.0)) throw ConfigError("settling_time: band must be positive");
    const double tol = band * std::abs(target);
    size_t last_out = time.size(); // sentinel: none
    for (size_t i = time.size(); i-- > 0;) {
        if (std::abs(r[i] - target) > tol) { last_out = i; break; }
    }
    if (last_out == time.size()) return time.front();  // always inside
    if (last_out + 1 == time.size()) return -1.0;      // never settles
    return time[last_out + 1];
}

std::vector<ViPoint> extract_vi_curve(const TraceSet& traces, const std::string& current_sel,
                                      const std::string& v_plus_sel,
                                      const std::string& v_minus_sel) {
    std::vector<double> i = traces.probe(current_sel);
    std::vector<double> vp = traces.probe(v_plus_sel);
    std::vector<double> vm = traces.probe(v_minus_sel);
    std::vector<ViPoint> curve(i.size());
    for (size_t k = 0; k < i.size(); ++k) curve[k] = {i[k], vp[k] - vm[k]};
    return curve;
}

double steady_state_slope(const std::vector<ViPoint>& curve, double i_floor,
                          double tail_fraction) {
    std::vector<size_t> active;
    for (size_t k = 0; k < curve.size(); ++k)
        if (std::abs(curve[k].i) > i_floor) active.push_back(k);
    if (active.empty()) return std::nan("");

    size_t want = std::max<size_t>(2, static_cast<size_t>(
                                          std::ceil(tail_fraction * static_cast<double>(curve.size()))));
    size_t take = std::min(want, active.size());
    double sv_i = 0.0, s_ii = 0.0;
    for (size_t k = active.size() - take; k < active.size(); ++k) {
        const ViPoint& p = curve[active[k]];
        sv_i += p.v * p.i;
        s_ii += p.i * p.i;
    }
    return sv_i / s_ii;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentResult res;
    res.spec = spec;
    if (spec.r1 != spec.r2)
        res.warnings.push_back("r1 != r2: the divider no longer pins v3 = v1/2, so the loop "
                               "equilibrium shifts away from r_ref");

    Circuit circuit = spec.kind == ExperimentKind::Increase ? build_increase_circuit(spec)
                                                            : build_decrease_circuit(spec);
    res.warnings.insert(res.warnings.end(), circuit.warnings.begin(), circuit.warnings.end());

    Simulator sim(std::move(circuit), spec.transient);
    // Both loops correct with the output latched high; the rail sign folds
    // sgn(r_ref - r_init) through the branch orientation.
    BiasHints hints{{"xamp", +1}};

    ExperimentResult out = std::move(res);
    out.traces = sim.transient(hints);

    const bool native = spec.realization == MemristorRealization::Native;
    const std::string i_sel = native ? "i(xmem)" : "i(xmem.emem)";
    out.time = out.traces.time;
    out.v1 = out.traces.probe("v(v1)");
    out.v2 = out.traces.probe("v(v2)");
    out.v3 = out.traces.probe("v(v3)");
    out.i_mem = out.traces.probe(i_sel);
    out.x = out.traces.probe("x(xmem)");
    out.r_mem = out.traces.probe("r(xmem)");

    ExperimentMetrics& m = out.metrics;
    // marked side (v2) first; the other side is v1 in the increase loop and
    // ground in the decrease loop
    m.vi_curve = extract_vi_curve(
        out.traces, i_sel, "v(v2)",
        spec.kind == ExperimentKind::Increase ? "v(v1)" : "v(0)");
    out.v_mem.resize(m.vi_curve.size());
    for (size_t k = 0; k < m.vi_curve.size(); ++k) out.v_mem[k] = m.vi_curve[k].v;

    m.final_r = out.r_mem.back();
    m.settling_time_2pct = settling_time(out.time, out.r_mem, spec.r_ref, 0.02);
    m.settling_time_5pct = settling_time(out.time, out.r_mem, spec.r_ref, 0.05);
    m.converged = std::abs(m.final_r - spec.r_ref) <= 0.02 * spec.r_ref;
    double slope = steady_state_slope(m.vi_curve, 10.0 * spec.transient.abstol_current);
    // quiescent tail: fall back to the recorded state, which is exact
    m.steady_slope = std::isnan(slope) ? m.final_r : slope;
    return out;
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

void write_experiment_csv(const ExperimentResult& r, std::ostream& os) {
    os << "time,v1,v2,v3,i_mem,v_mem,x,r_mem\n";
    for (size_t k = 0; k < r.time.size(); ++k) {
        os << format_csv_number(r.time[k]) << ',' << format_csv_number(r.v1[k]) << ','
           << format_csv_number(r.v2[k]) << ',' << format_csv_number(r.v3[k]) << ','
           << format_csv_number(r.i_mem[k]) << ',' << format_csv_number(r.v_mem[k]) << ','
           << format_csv_number(r.x[k]) << ',' << format_csv_number(r.r_mem[k]) << '\n';
    }
}

void write_metrics_json(const ExperimentResult& r, std::ostream& os) {
    nlohmann::json j;
    j["final_r"] = r.metrics.final_r;
    if (r.metrics.settling_time_2pct >= 0.0) j["settling_time_2pct"] = r.metrics.settling_time_2pct;
    else j["settling_time_2pct"] = nullptr;
    if (r.metrics.settling_time_5pct >= 0.0) j["settling_time_5pct"] = r.metrics.settling_time_5pct;
    else j["settling_time_5pct"] = nullptr;
    j["converged"] = r.metrics.converged;
    j["steady_slope"] = r.metrics.steady_slope;
    os << j.dump(2) << '\n';
}

} // namespace memsim
