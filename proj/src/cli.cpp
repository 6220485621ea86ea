#include "memsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "memsim/experiment.hpp"
#include "memsim/sweep.hpp"

namespace memsim {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitSolve = 3;

namespace fs = std::filesystem;

double cli_number(const std::string& text, const char* what) {
    try {
        return parse_spice_number(text);
    } catch (const ParseError&) {
        throw ConfigError(std::string("invalid value '") + text + "' for " + what);
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::ofstream open_output(const fs::path& path, bool force) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    if (fs::exists(path) && !force)
        throw ConfigError("refusing to overwrite '" + path.string() + "' (use --force)");
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
    return os;
}

struct TransientFlags {
    std::string tstop, dt;
    std::string integrator = "trap";
    bool adaptive = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tstop", tstop, "stop time (SPICE suffixes ok, e.g. 15m)");
        cmd->add_option("--dt", dt, "time step (default 1u)");
        cmd->add_option("--integrator", integrator, "be | trap (default trap)")
            ->check(CLI::IsMember({"be", "trap"}));
        cmd->add_flag("--adaptive", adaptive, "adaptive step-doubling LTE control");
    }

    void apply(TransientConfig& cfg) const {
        if (!tstop.empty()) cfg.t_stop = cli_number(tstop, "--tstop");
        if (!dt.empty()) cfg.dt = cli_number(dt, "--dt");
        cfg.integrator = integrator == "be" ? Integrator::BackwardEuler : Integrator::Trapezoidal;
        cfg.adaptive = adaptive;
    }
};

struct ExperimentFlags {
    std::string rref, rinit, r1, r2, supply, pole, gain;
    std::string realization = "native";
    int window_exponent = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--rref", rref, "reference resistance to copy (default 2k / 500)");
        cmd->add_option("--rinit", rinit, "initial memristance (default 1k / 2k)");
        cmd->add_option("--r1", r1, "divider resistor R1 (default 1k)");
        cmd->add_option("--r2", r2, "divider resistor R2 (default 1k)");
        cmd->add_option("--supply", supply, "op-amp rail voltage A (default 5)");
        cmd->add_option("--opamp-pole", pole, "op-amp lag pole in Hz (default off)");
        cmd->add_option("--opamp-gain", gain, "op-amp open-loop gain (default 2e5)");
        cmd->add_option("--realization", realization, "native | subckt (default native)")
            ->check(CLI::IsMember({"native", "subckt"}));
        cmd->add_option("--window-exponent", window_exponent,
                        "override the window exponent (native realization)");
    }

    ExperimentSpec spec(ExperimentKind kind, const TransientFlags& tf) const {
        ExperimentSpec s;
        s.kind = kind;
        if (kind == ExperimentKind::Decrease) {
            s.r_ref = 500.0;
            s.memristor.r_init = 2e3;
        }
        if (!rref.empty()) s.r_ref = cli_number(rref, "--rref");
        if (!rinit.empty()) s.memristor.r_init = cli_number(rinit, "--rinit");
        if (!r1.empty()) s.r1 = cli_number(r1, "--r1");
        if (!r2.empty()) s.r2 = cli_number(r2, "--r2");
        if (!supply.empty()) s.supply = cli_number(supply, "--supply");
        if (!pole.empty()) s.opamp_pole_hz = cli_number(pole, "--opamp-pole");
        if (!gain.empty()) s.opamp_gain = cli_number(gain, "--opamp-gain");
        if (window_exponent > 0) s.memristor.exponent_override = window_exponent;
        s.realization = realization == "subckt" ? MemristorRealization::Subckt
                                                : MemristorRealization::Native;
        tf.apply(s.transient);
        s.validate();
        return s;
    }
};

void print_metrics(std::ostream& os, const ExperimentMetrics& m) {
    auto ms = [](double s) {
        return s < 0.0 ? std::string("not settled")
                       : format_csv_number(s * 1e3) + " ms";
    };
    os << "  final_r            = " << format_csv_number(m.final_r) << " ohm\n"
       << "  settling_time_2pct = " << ms(m.settling_time_2pct) << "\n"
       << "  settling_time_5pct = " << ms(m.settling_time_5pct) << "\n"
       << "  converged          = " << (m.converged ? "yes" : "no") << "\n"
       << "  steady_slope       = " << format_csv_number(m.steady_slope) << " ohm\n";
}

ExperimentKind parse_kind(const std::string& kind) {
    if (kind == "increase") return ExperimentKind::Increase;
    if (kind == "decrease") return ExperimentKind::Decrease;
    throw ConfigError("experiment kind must be 'increase' or 'decrease'");
}

int env_thread_cap() {
    const char* env = std::getenv("MEMSIM_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) return 0;
    return static_cast<int>(v);
}

// --- run ------------------------------------------------------------------

int cmd_run(const std::string& input, const TransientFlags& tf, const std::string& out_dir,
            const std::string& probes_arg, bool force) {
    std::ifstream in(input);
    if (!in) {
        std::cerr << "error: cannot read netlist '" << input << "'\n";
        return kExitUsage;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    Circuit circuit;
    try {
        NetlistDocument doc = parse_netlist(buf.str());
        circuit = flatten(doc);
        if (circuit.elements().empty())
            throw ParseError("netlist contains no elements", 1);
    } catch (const SimError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    }
    for (const std::string& w : circuit.warnings) std::cerr << "warning: " << w << "\n";

    TransientConfig cfg;
    bool have_tstop = false;
    if (circuit.tran) {
        cfg.dt = circuit.tran->tstep;
        cfg.t_stop = circuit.tran->tstop;
        have_tstop = true;
    }
    if (!tf.tstop.empty()) have_tstop = true;
    try {
        tf.apply(cfg);
        if (!have_tstop)
            throw ConfigError("netlist has no .TRAN directive; pass --tstop");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        Simulator sim(std::move(circuit), cfg);
        TraceSet traces = sim.transient();
        fs::path csv = fs::path(out_dir) / (fs::path(input).stem().string() + ".csv");
        std::ofstream os = open_output(csv, force);
        traces.write_csv(os, split_list(probes_arg));
        std::cout << "wrote " << csv.string() << " (" << traces.time.size() << " points)\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const EvalError& e) { // bad probe selector and the like
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SimError& e) {
        std::cerr << "solve error: " << e.what() << "\n";
        return kExitSolve;
    }
}

// --- experiment -------------------------------------------------------------

int cmd_experiment(const std::string& kind_arg, const ExperimentFlags& ef,
                   const TransientFlags& tf, const std::string& out_dir, bool force) {
    ExperimentSpec spec;
    try {
        spec = ef.spec(parse_kind(kind_arg), tf);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        ExperimentResult result = run_experiment(spec);
        for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";

        fs::path csv = fs::path(out_dir) / (kind_arg + ".csv");
        fs::path json = fs::path(out_dir) / (kind_arg + ".metrics.json");
        {
            std::ofstream os = open_output(csv, force);
            write_experiment_csv(result, os);
        }
        {
            std::ofstream os = open_output(json, force);
            write_metrics_json(result, os);
        }
        std::cout << "experiment " << kind_arg << ": r_ref=" << format_csv_number(spec.r_ref)
                  << " r_init=" << format_csv_number(spec.memristor.r_init)
                  << " supply=" << format_csv_number(spec.supply) << "\n";
        print_metrics(std::cout, result.metrics);
        std::cout << "wrote " << csv.string() << ", " << json.string() << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const SimError& e) {
        std::cerr << "solve error: " << e.what() << "\n";
        return kExitSolve;
    }
}

// --- sweep ------------------------------------------------------------------

int cmd_sweep(const std::string& kind_arg, const std::string& axis_arg,
              const std::string& values_arg, const ExperimentFlags& ef, const TransientFlags& tf,
              const std::string& out_dir, bool force, bool serial) {
    SweepRequest req;
    try {
        req.base = ef.spec(parse_kind(kind_arg), tf);
        if (axis_arg == "rref") req.axis = SweepAxis::RRef;
        else if (axis_arg == "supply") req.axis = SweepAxis::Supply;
        else throw ConfigError("--axis must be 'rref' or 'supply'");
        for (const std::string& v : split_list(values_arg))
            req.values.push_back(cli_number(v, "--values"));
        if (req.values.size() < 2)
            throw ConfigError("sweep needs at least two --values");
        // direction preconditions must hold for every point
        for (double v : req.values) sweep_point(req, v).validate();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    const std::string axis_name = axis_arg;
    try {
        fs::create_directories(out_dir);
        auto on_result = [&](size_t idx, const ExperimentResult& r) {
            std::ostringstream stem;
            stem << "sweep_" << axis_name << "_" << format_csv_number(req.values[idx]);
            std::ofstream cs = open_output(fs::path(out_dir) / (stem.str() + ".csv"), force);
            write_experiment_csv(r, cs);
            std::ofstream js = open_output(fs::path(out_dir) / (stem.str() + ".metrics.json"),
                                           force);
            write_metrics_json(r, js);
        };
        std::vector<SweepRow> rows = run_sweep(req, !serial, env_thread_cap(), on_result);

        std::ofstream sum = open_output(fs::path(out_dir) / "sweep_summary.csv", force);
        write_sweep_summary_csv(rows, sum);

        std::cout << axis_name << ",settling_time_5pct,final_r,status\n";
        bool any_failed = false;
        for (const SweepRow& r : rows) {
            if (r.ok) {
                std::cout << format_csv_number(r.value) << ','
                          << format_csv_number(r.metrics.settling_time_5pct) << ','
                          << format_csv_number(r.metrics.final_r) << ",ok\n";
            } else {
                std::cout << format_csv_number(r.value) << ",,,failed: " << r.error << "\n";
                any_failed = true;
            }
        }
        std::cout << "wrote " << (fs::path(out_dir) / "sweep_summary.csv").string() << "\n";
        return any_failed ? kExitSolve : kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SimError& e) {
        std::cerr << "solve error: " << e.what() << "\n";
        return kExitSolve;
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"memsim: SPICE-subset simulator for memristor "
                 "resistance-programming circuits"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    bool force = false;
    app.add_option("--out", out_dir, "output directory (created if absent)")->capture_default_str();
    app.add_flag("--force", force, "overwrite existing output files");

    // run
    auto* run = app.add_subcommand("run", "simulate a netlist file");
    std::string input, probes;
    run->add_option("netlist", input, "input netlist")->required();
    run->add_option("--probe", probes, "comma-separated signal selectors (default: all)");
    TransientFlags run_tf;
    run_tf.attach(run);

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a resistance-copying experiment");
    std::string exp_kind;
    exp->add_option("kind", exp_kind, "increase | decrease")->required();
    ExperimentFlags exp_ef;
    TransientFlags exp_tf;
    exp_ef.attach(exp);
    exp_tf.attach(exp);

    // sweep
    auto* sw = app.add_subcommand("sweep", "sweep r_ref or the supply across experiments");
    std::string sw_kind, sw_axis, sw_values;
    bool sw_serial = false;
    sw->add_option("kind", sw_kind, "increase | decrease")->required();
    sw->add_option("--axis", sw_axis, "rref | supply")->required();
    sw->add_option("--values", sw_values, "comma-separated axis values (>= 2)")->required();
    sw->add_flag("--serial", sw_serial, "disable sweep parallelism");
    ExperimentFlags sw_ef;
    TransientFlags sw_tf;
    sw_ef.attach(sw);
    sw_tf.attach(sw);

    std::vector<std::string> argv(args);
    try {
        std::vector<const char*> cargv;
        cargv.push_back("memsim");
        for (const std::string& a : argv) cargv.push_back(a.c_str());
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (run->parsed()) return cmd_run(input, run_tf, out_dir, probes, force);
    if (exp->parsed()) return cmd_experiment(exp_kind, exp_ef, exp_tf, out_dir, force);
    if (sw->parsed())
        return cmd_sweep(sw_kind, sw_axis, sw_values, sw_ef, sw_tf, out_dir, force, sw_serial);
    return kExitUsage;
}

} // namespace memsim
