#include "memsim/mna.hpp"

#include <algorithm>
#include <cmath>

#include "memsim/opamp.hpp"

namespace memsim {

namespace {
constexpr double kStateAbsTol = 1e-12;
constexpr double kResidualCrushed = 1e-3; // in units of row tolerance
} // namespace

// ---------------------------------------------------------------------------
// Config / layout / solution plumbing
// ---------------------------------------------------------------------------

TransientConfig TransientConfig::normalized() const {
    TransientConfig c = *this;
    if (!(c.t_stop > 0.0)) throw ConfigError("transient: t_stop must be positive");
    if (!(c.dt > 0.0)) throw ConfigError("transient: dt must be positive");
    if (c.dt > c.t_stop) c.dt = c.t_stop;
    if (c.dt_min <= 0.0) c.dt_min = c.dt / 1024.0;
    if (c.dt_max <= 0.0) c.dt_max = c.adaptive ? std::min(c.t_stop / 10.0, c.dt * 1024.0) : c.dt;
    c.dt_max = std::max(c.dt_max, c.dt);
    if (!(c.dt_min <= c.dt))
        throw ConfigError("transient: need 0 < dt_min <= dt <= dt_max");
    if (c.max_newton_iters < 1) throw ConfigError("transient: max_newton_iters must be >= 1");
    if (!(c.reltol > 0.0) || !(c.abstol_voltage > 0.0) || !(c.abstol_current > 0.0))
        throw ConfigError("transient: tolerances must be positive");
    return c;
}

int UnknownLayout::node_slot(const std::string& name) const {
    if (name == "0") return -1;
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == name) return static_cast<int>(i);
    throw EvalError("unknown node '" + name + "'");
}

int UnknownLayout::branch_slot(const std::string& element) const {
    for (size_t i = 0; i < branches.size(); ++i)
        if (branches[i] == element) return static_cast<int>(nodes.size() + i);
    throw EvalError("element '" + element + "' has no branch current");
}

int UnknownLayout::state_slot(const std::string& element) const {
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i] == element)
            return static_cast<int>(nodes.size() + branches.size() + i);
    throw EvalError("element '" + element + "' has no device state");
}

double Solution::v(const std::string& node) const {
    int s = layout->node_slot(node);
    return s < 0 ? 0.0 : u[static_cast<size_t>(s)];
}

double Solution::i(const std::string& element) const {
    return u[static_cast<size_t>(layout->branch_slot(element))];
}

double Solution::state(const std::string& element) const {
    return u[static_cast<size_t>(layout->state_slot(element))];
}

// ---------------------------------------------------------------------------
// Compilation: elements -> slot-resolved stamps
// ---------------------------------------------------------------------------

Simulator::Simulator(Circuit circuit, TransientConfig config)
    : circuit_(std::move(circuit)), cfg_(config.normalized()) {
    compile();
}

void Simulator::compile() {
    layout_ = std::make_shared<UnknownLayout>();
    layout_->nodes = circuit_.node_names();

    // first pass: claim branch currents and states so expression binding
    // can see every slot regardless of element order
    for (const FlatElement& e : circuit_.elements()) {
        if (const auto* v = std::get_if<FlatVSource>(&e)) layout_->branches.push_back(v->name);
        else if (const auto* ev = std::get_if<FlatVcvs>(&e)) layout_->branches.push_back(ev->name);
        else if (const auto* op = std::get_if<FlatOpAmp>(&e)) layout_->branches.push_back(op->name);
        else if (const auto* c = std::get_if<FlatCapacitor>(&e)) layout_->branches.push_back(c->name);
    }
    for (const FlatElement& e : circuit_.elements()) {
        if (const auto* m = std::get_if<FlatMemristor>(&e)) layout_->states.push_back(m->name);
        else if (const auto* op = std::get_if<FlatOpAmp>(&e)) {
            if (op->model.has_pole()) layout_->states.push_back(op->name);
        }
    }

    auto resolver = [this](ExprOp kind, const std::string& name) -> int {
        if (kind == ExprOp::NodeV) return layout_->node_slot(name);
        return layout_->branch_slot(name);
    };

    for (const FlatElement& e : circuit_.elements()) {
        if (const auto* r = std::get_if<FlatResistor>(&e)) {
            if (!(r->ohms > 0.0))
                throw AssemblyError("resistor '" + r->name + "' must have positive resistance");
            resistors_.push_back({r->a, r->b, 1.0 / r->ohms});
        } else if (const auto* c = std::get_if<FlatCapacitor>(&e)) {
            if (!(c->farads > 0.0))
                throw AssemblyError("capacitor '" + c->name + "' must have positive capacitance");
            capacitors_.push_back({c->a, c->b, c->farads, c->ic, layout_->branch_slot(c->name),
                                   capacitors_.size()});
        } else if (const auto* v = std::get_if<FlatVSource>(&e)) {
            vsources_.push_back({v->a, v->b, v->volts, layout_->branch_slot(v->name)});
        } else if (const auto* ev = std::get_if<FlatVcvs>(&e)) {
            vcvs_.push_back({ev->a, ev->b, BoundExpr(ev->vol, resolver),
                             layout_->branch_slot(ev->name)});
        } else if (const auto* g = std::get_if<FlatVccs>(&e)) {
            vccs_.push_back({g->a, g->b, BoundExpr(g->cur, resolver)});
        } else if (const auto* op = std::get_if<FlatOpAmp>(&e)) {
            int lag = op->model.has_pole() ? layout_->state_slot(op->name) : -1;
            size_t hist = 0;
            if (lag >= 0) {
                hist = static_cast<size_t>(
                    std::count_if(opamps_.begin(), opamps_.end(),
                                  [](const CompiledOpAmp& o) { return o.lag >= 0; }));
            }
            opamp_by_name_[element_name(e)] = opamps_.size();
            opamps_.push_back({op->out, op->inp, op->inn, op->model,
                               layout_->branch_slot(op->name), lag, hist});
        } else if (const auto* m = std::get_if<FlatMemristor>(&e)) {
            memristors_.push_back({m->name, m->plus, m->minus, m->params, m->x0,
                                   layout_->state_slot(m->name), memristors_.size()});
        }
    }

    for (const auto& [node, volts] : circuit_.node_ics)
        node_ics_.emplace_back(layout_->node_slot(node), volts);

    // row kind table (rows and unknowns share indices)
    row_kinds_.assign(layout_->size(), RowKind::NodeCurrent);
    for (const auto& v : vsources_) row_kinds_[static_cast<size_t>(v.br)] = RowKind::BranchVoltage;
    for (const auto& e : vcvs_) row_kinds_[static_cast<size_t>(e.br)] = RowKind::BranchVoltage;
    for (const auto& o : opamps_) {
        row_kinds_[static_cast<size_t>(o.br)] = RowKind::BranchVoltage;
        if (o.lag >= 0) row_kinds_[static_cast<size_t>(o.lag)] = RowKind::BranchVoltage;
    }
    for (const auto& c : capacitors_) row_kinds_[static_cast<size_t>(c.br)] = RowKind::BranchCurrent;
    for (const auto& m : memristors_) row_kinds_[static_cast<size_t>(m.xs)] = RowKind::State;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

void Simulator::assemble(const std::vector<double>& u, const AssemblyOpts& opts,
                         std::vector<double>& f, DenseMatrix* jac) const {
    const size_t n = layout_->size();
    f.assign(n, 0.0);
    if (jac) jac->clear();

    auto V = [&](int slot) { return slot < 0 ? 0.0 : u[static_cast<size_t>(slot)]; };
    auto addF = [&](int row, double v) {
        if (row >= 0) f[static_cast<size_t>(row)] += v;
    };
    auto addJ = [&](int row, int col, double v) {
        if (jac && row >= 0 && col >= 0)
            jac->at(static_cast<size_t>(row), static_cast<size_t>(col)) += v;
    };

    const bool dc = opts.mode == Mode::Dc;
    const bool trap = opts.integrator == Integrator::Trapezoidal;
    const double dt = opts.dt;

    for (const CompiledResistor& r : resistors_) {
        double i = (V(r.a) - V(r.b)) * r.g;
        addF(r.a, i);
        addF(r.b, -i);
        addJ(r.a, r.a, r.g); addJ(r.a, r.b, -r.g);
        addJ(r.b, r.a, -r.g); addJ(r.b, r.b, r.g);
    }

    for (const CompiledVSource& v : vsources_) {
        double j = u[static_cast<size_t>(v.br)];
        addF(v.a, j); addF(v.b, -j);
        addJ(v.a, v.br, 1.0); addJ(v.b, v.br, -1.0);
        addF(v.br, V(v.a) - V(v.b) - v.volts * opts.source_scale);
        addJ(v.br, v.a, 1.0); addJ(v.br, v.b, -1.0);
    }

    for (const CompiledVcvs& e : vcvs_) {
        double j = u[static_cast<size_t>(e.br)];
        addF(e.a, j); addF(e.b, -j);
        addJ(e.a, e.br, 1.0); addJ(e.b, e.br, -1.0);
        ExprValue val = e.vol.eval(u);
        addF(e.br, V(e.a) - V(e.b) - val.value);
        addJ(e.br, e.a, 1.0); addJ(e.br, e.b, -1.0);
        for (const auto& [slot, d] : val.d) addJ(e.br, slot, -d);
    }

    for (const CompiledVccs& g : vccs_) {
        ExprValue val = g.cur.eval(u);
        addF(g.a, val.value);
        addF(g.b, -val.value);
        for (const auto& [slot, d] : val.d) {
            addJ(g.a, slot, d);
            addJ(g.b, slot, -d);
        }
    }

    for (const CompiledCapacitor& c : capacitors_) {
        double j = u[static_cast<size_t>(c.br)];
        addF(c.a, j); addF(c.b, -j);
        addJ(c.a, c.br, 1.0); addJ(c.b, c.br, -1.0);
        double vab = V(c.a) - V(c.b);
        if (dc) {
            if (c.ic) { // held at its initial voltage; branch current floats
                addF(c.br, vab - *c.ic);
                addJ(c.br, c.a, 1.0); addJ(c.br, c.b, -1.0);
            } else { // open at DC
                addF(c.br, j);
                addJ(c.br, c.br, 1.0);
            }
            continue;
        }
        const double v_prev = opts.prev->cap_v[c.hist];
        if (trap) {
            double geq = 2.0 * c.c / dt;
            addF(c.br, j - geq * (vab - v_prev) + opts.prev->cap_i[c.hist]);
            addJ(c.br, c.br, 1.0);
            addJ(c.br, c.a, -geq); addJ(c.br, c.b, geq);
        } else {
            double geq = c.c / dt;
            addF(c.br, j - geq * (vab - v_prev));
            addJ(c.br, c.br, 1.0);
            addJ(c.br, c.a, -geq); addJ(c.br, c.b, geq);
        }
    }

    for (size_t oi = 0; oi < opamps_.size(); ++oi) {
        const CompiledOpAmp& o = opamps_[oi];
        double j = u[static_cast<size_t>(o.br)];
        addF(o.out, j);
        addJ(o.out, o.br, 1.0);

        int rail = 0;
        if (opts.forced_rails) {
            auto it = opts.forced_rails->find(oi);
            if (it != opts.forced_rails->end()) rail = it->second;
        }
        double vp = V(o.inp), vm = V(o.inn);
        double target = opamp_output(vp, vm, o.model);
        double dtarget = opamp_output_derivative(vp, vm, o.model);

        if (o.lag < 0) {
            if (rail != 0) {
                addF(o.br, V(o.out) - rail * o.model.v_sat);
                addJ(o.br, o.out, 1.0);
            } else {
                addF(o.br, V(o.out) - target);
                addJ(o.br, o.out, 1.0);
                addJ(o.br, o.inp, -dtarget);
                addJ(o.br, o.inn, dtarget);
            }
            continue;
        }

        double s = u[static_cast<size_t>(o.lag)];
        addF(o.br, V(o.out) - s);
        addJ(o.br, o.out, 1.0);
        addJ(o.br, o.lag, -1.0);

        if (rail != 0) {
            addF(o.lag, s - rail * o.model.v_sat);
            addJ(o.lag, o.lag, 1.0);
        } else if (dc) {
            addF(o.lag, s - target);
            addJ(o.lag, o.lag, 1.0);
            addJ(o.lag, o.inp, -dtarget);
            addJ(o.lag, o.inn, dtarget);
        } else {
            const double w = 2.0 * M_PI * o.model.pole_freq;
            const double s_prev = opts.prev->u[static_cast<size_t>(o.lag)];
            if (trap) {
                addF(o.lag, s - s_prev - 0.5 * dt * (w * (target - s) + opts.prev->lag_sdot[o.hist]));
                addJ(o.lag, o.lag, 1.0 + 0.5 * dt * w);
                addJ(o.lag, o.inp, -0.5 * dt * w * dtarget);
                addJ(o.lag, o.inn, 0.5 * dt * w * dtarget);
            } else {
                addF(o.lag, s - s_prev - dt * w * (target - s));
                addJ(o.lag, o.lag, 1.0 + dt * w);
                addJ(o.lag, o.inp, -dt * w * dtarget);
                addJ(o.lag, o.inn, dt * w * dtarget);
            }
        }
    }

    for (const CompiledMemristor& m : memristors_) {
        const double x = u[static_cast<size_t>(m.xs)];
        const double dr = m.prm.r_off - m.prm.r_on;
        double r = detail::memristance_unchecked(x, m.prm);
        double dg_dx;
        if (r > 0.01 * m.prm.r_on) {
            dg_dx = dr / (r * r); // d(1/r)/dx with dr/dx = -dr
        } else { // flat guard; iterates never converge here
            r = 0.01 * m.prm.r_on;
            dg_dx = 0.0;
        }
        const double g = 1.0 / r;
        const double vab = V(m.plus) - V(m.minus);
        const double i = vab * g;
        addF(m.plus, i); addF(m.minus, -i);
        addJ(m.plus, m.plus, g); addJ(m.plus, m.minus, -g);
        addJ(m.minus, m.plus, -g); addJ(m.minus, m.minus, g);
        addJ(m.plus, m.xs, vab * dg_dx);
        addJ(m.minus, m.xs, -vab * dg_dx);

        if (dc) {
            addF(m.xs, x - m.x0);
            addJ(m.xs, m.xs, 1.0);
            continue;
        }
        const int e = m.prm.window_exponent();
        const double k = m.prm.k();
        const double fw = detail::window_exp(x, e);
        const double dfw = detail::window_exp_derivative(x, e);
        const double xdot = k * i * fw;
        const double dxdot_dx = k * (vab * dg_dx * fw + i * dfw);
        const double dxdot_dv = k * fw * g; // per volt of (v_plus - v_minus)
        const double x_prev = opts.prev->u[static_cast<size_t>(m.xs)];
        const double h = trap ? 0.5 * dt : dt;
        double hist = trap ? 0.5 * dt * opts.prev->mem_xdot[m.hist] : 0.0;
        addF(m.xs, x - x_prev - h * xdot - hist);
        addJ(m.xs, m.xs, 1.0 - h * dxdot_dx);
        addJ(m.xs, m.plus, -h * dxdot_dv);
        addJ(m.xs, m.minus, h * dxdot_dv);
    }

    // DC-only node pins from .IC: replace the KCL row with V(node) = value
    if (dc) {
        for (const auto& [slot, volts] : node_ics_) {
            size_t r = static_cast<size_t>(slot);
            f[r] = u[r] - volts;
            if (jac) {
                for (size_t c = 0; c < layout_->size(); ++c) jac->at(r, c) = 0.0;
                jac->at(r, r) = 1.0;
            }
        }
    }

    // gmin homotopy: leak from every node to ground
    if (opts.gmin > 0.0) {
        for (size_t r = 0; r < layout_->n_nodes(); ++r) {
            bool pinned = dc && std::any_of(node_ics_.begin(), node_ics_.end(),
                                            [&](const auto& p) { return p.first == static_cast<int>(r); });
            if (pinned) continue;
            f[r] += opts.gmin * u[r];
            if (jac) jac->at(r, r) += opts.gmin;
        }
    }
}

// ---------------------------------------------------------------------------
// Newton
// ---------------------------------------------------------------------------

double Simulator::row_tolerance(size_t row, const std::vector<double>& u) const {
    switch (row_kinds_[row]) {
        case RowKind::NodeCurrent: return cfg_.abstol_current;
        case RowKind::BranchVoltage: return cfg_.abstol_voltage + cfg_.reltol * std::abs(u[row]);
        case RowKind::BranchCurrent: return cfg_.abstol_current + cfg_.reltol * std::abs(u[row]);
        case RowKind::State: return kStateAbsTol * (1.0 + std::abs(u[row]));
    }
    return cfg_.abstol_current;
}

double Simulator::weighted_residual(const std::vector<double>& f,
                                    const std::vector<double>& u) const {
    double worst = 0.0;
    for (size_t r = 0; r < f.size(); ++r) {
        if (!std::isfinite(f[r])) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(f[r]) / row_tolerance(r, u));
    }
    return worst;
}

bool Simulator::update_small(const std::vector<double>& du, const std::vector<double>& u) const {
    for (size_t s = 0; s < du.size(); ++s) {
        double tol;
        switch (row_kinds_[s]) {
            case RowKind::NodeCurrent:   // node-voltage unknown
            case RowKind::BranchVoltage: // op-amp output / source currents share slots w/ rows
                tol = (s < layout_->n_nodes())
                          ? cfg_.abstol_voltage + cfg_.reltol * std::abs(u[s])
                          : cfg_.abstol_current + cfg_.reltol * std::abs(u[s]);
                break;
            case RowKind::BranchCurrent:
                tol = cfg_.abstol_current + cfg_.reltol * std::abs(u[s]);
                break;
            case RowKind::State:
            default:
                tol = kStateAbsTol + cfg_.reltol * 1e-3 * std::abs(u[s]);
                break;
        }
        if (std::abs(du[s]) > tol) return false;
    }
    return true;
}

std::string Simulator::worst_node(const std::vector<double>& f) const {
    size_t worst = 0;
    double best = -1.0;
    for (size_t r = 0; r < layout_->n_nodes(); ++r) {
        if (std::abs(f[r]) > best) { best = std::abs(f[r]); worst = r; }
    }
    return layout_->nodes.empty() ? std::string("-") : layout_->nodes[worst];
}

int Simulator::newton(std::vector<double>& u, const AssemblyOpts& opts) {
    const size_t n = layout_->size();
    std::vector<double> f, f_try;
    DenseMatrix jac(n);
    std::vector<double> u_try(n);

    // in update units: max |du_i| / du_tol_i
    auto du_norm = [&](const std::vector<double>& du, const std::vector<double>& at) {
        double worst = 0.0;
        for (size_t s = 0; s < n; ++s) {
            if (!std::isfinite(du[s])) return std::numeric_limits<double>::infinity();
            double tol;
            if (s < layout_->n_nodes())
                tol = cfg_.abstol_voltage + cfg_.reltol * std::abs(at[s]);
            else if (row_kinds_[s] == RowKind::State)
                tol = kStateAbsTol + cfg_.reltol * 1e-3 * std::abs(at[s]);
            else
                tol = cfg_.abstol_current + cfg_.reltol * std::abs(at[s]);
            worst = std::max(worst, std::abs(du[s]) / tol);
        }
        return worst;
    };

    bool du_small = false;
    for (int iter = 0; iter < cfg_.max_newton_iters; ++iter) {
        assemble(u, opts, f, &jac);
        double norm = weighted_residual(f, u);
        if (!std::isfinite(norm))
            throw ConvergenceError("newton: residual is not finite (worst node '" +
                                   worst_node(f) + "')");
        if (norm <= kResidualCrushed) return iter;
        if (norm <= 1.0 && du_small) return iter;
        for (size_t r = 0; r < n; ++r)
            for (size_t col = 0; col < n; ++col)
                if (!std::isfinite(jac.at(r, col)))
                    throw ConvergenceError("newton: jacobian is not finite (worst node '" +
                                           worst_node(f) + "')");

        std::vector<double> rhs(n);
        for (size_t r = 0; r < n; ++r) rhs[r] = -f[r];
        std::vector<double> du = lu_solve(jac, std::move(rhs));
        ++stats_.newton_iterations;
        const double step_norm = du_norm(du, u);

        // Damping with the natural (affine-invariant) monotonicity test: the
        // simplified Newton correction at the trial point, solved with the
        // current Jacobian, must contract. A plain residual norm is a poor
        // merit here because row tolerances differ by orders of magnitude.
        double alpha = 1.0;
        double best_alpha = -1.0, best_bar = std::numeric_limits<double>::infinity();
        for (int ls = 0; ls < 11; ++ls) {
            for (size_t s = 0; s < n; ++s) u_try[s] = u[s] + alpha * du[s];
            assemble(u_try, opts, f_try, nullptr);
            double bar_norm = std::numeric_limits<double>::infinity();
            if (weighted_residual(f_try, u_try) <= kResidualCrushed) {
                best_alpha = alpha;
                best_bar = 0.0;
                break;
            }
            if (std::all_of(f_try.begin(), f_try.end(),
                            [](double v) { return std::isfinite(v); })) {
                std::vector<double> rhs_try(n);
                for (size_t r = 0; r < n; ++r) rhs_try[r] = -f_try[r];
                try {
                    std::vector<double> du_bar = lu_solve(jac, std::move(rhs_try));
                    bar_norm = du_norm(du_bar, u_try);
                } catch (const SingularMatrixError&) {
                    bar_norm = std::numeric_limits<double>::infinity();
                }
            }
            if (bar_norm < best_bar) { best_bar = bar_norm; best_alpha = alpha; }
            if (bar_norm <= (1.0 - 0.5 * alpha) * step_norm) break;
            alpha *= 0.5;
        }
        if (!std::isfinite(best_bar))
            throw ConvergenceError("newton: residual is not finite (worst node '" +
                                   worst_node(f) + "')");
        for (size_t s = 0; s < n; ++s) {
            double step = best_alpha * du[s];
            u_try[s] = u[s] + step;
            du[s] = step;
        }
        u.swap(u_try);
        du_small = update_small(du, u);
    }

    assemble(u, opts, f, nullptr);
    if (weighted_residual(f, u) <= 1.0 && du_small) return cfg_.max_newton_iters;
    throw ConvergenceError("newton: no convergence after " +
                           std::to_string(cfg_.max_newton_iters) + " iterations (worst node '" +
                           worst_node(f) + "')");
}

// ---------------------------------------------------------------------------
// DC operating point
// ---------------------------------------------------------------------------

Solution Simulator::make_solution(double t, std::vector<double> u) const {
    Solution s;
    s.t = t;
    s.u = std::move(u);
    s.layout = layout_;
    return s;
}

Solution Simulator::dc_operating_point(const BiasHints& hints) {
    return dc_operating_point(hints, DcStrategy::Auto);
}

Solution Simulator::dc_operating_point(const BiasHints& hints, DcStrategy strategy) {
    std::vector<double> u(layout_->size(), 0.0);
    for (const CompiledMemristor& m : memristors_) u[static_cast<size_t>(m.xs)] = m.x0;

    std::map<size_t, int> rails;
    for (const auto& [name, rail] : hints) {
        auto it = opamp_by_name_.find(name);
        if (it == opamp_by_name_.end())
            throw ConfigError("bias hint names unknown op-amp '" + name + "'");
        if (rail != 1 && rail != -1)
            throw ConfigError("bias hint for '" + name + "' must be +1 or -1");
        rails[it->second] = rail;
    }

    AssemblyOpts dc;
    dc.mode = Mode::Dc;

    auto plain = [&]() {
        if (!rails.empty()) {
            AssemblyOpts forced = dc;
            forced.forced_rails = &rails;
            newton(u, forced); // latch the hinted amps, then release
        }
        newton(u, dc);
    };

    auto gmin_ladder = [&]() {
        std::fill(u.begin(), u.end(), 0.0);
        for (const CompiledMemristor& m : memristors_) u[static_cast<size_t>(m.xs)] = m.x0;
        AssemblyOpts o = dc;
        for (double g = 1e-2; g > 1e-13; g *= 0.1) {
            o.gmin = g;
            newton(u, o);
        }
        o.gmin = 0.0;
        newton(u, o);
    };

    auto source_ladder = [&]() {
        std::fill(u.begin(), u.end(), 0.0);
        for (const CompiledMemristor& m : memristors_) u[static_cast<size_t>(m.xs)] = m.x0;
        AssemblyOpts o = dc;
        for (int step = 1; step <= 20; ++step) {
            o.source_scale = static_cast<double>(step) / 20.0;
            newton(u, o);
        }
    };

    switch (strategy) {
        case DcStrategy::PlainNewton:
            plain();
            stats_.dc_strategy = "newton";
            break;
        case DcStrategy::GminStepping:
            gmin_ladder();
            stats_.dc_strategy = "gmin";
            break;
        case DcStrategy::SourceStepping:
            source_ladder();
            stats_.dc_strategy = "source";
            break;
        case DcStrategy::Auto:
            try {
                plain();
                stats_.dc_strategy = "newton";
            } catch (const ConvergenceError&) {
                try {
                    gmin_ladder();
                    stats_.dc_strategy = "gmin";
                } catch (const ConvergenceError&) {
                    source_ladder();
                    stats_.dc_strategy = "source";
                }
            }
            break;
    }

    return make_solution(0.0, u);
}

// ---------------------------------------------------------------------------
// Transient
// ---------------------------------------------------------------------------

Simulator::EngineState Simulator::initial_state(const Solution& dc) const {
    EngineState s;
    s.t = 0.0;
    s.u = dc.u;
    auto V = [&](int slot) { return slot < 0 ? 0.0 : s.u[static_cast<size_t>(slot)]; };
    s.cap_v.resize(capacitors_.size());
    s.cap_i.resize(capacitors_.size());
    for (size_t i = 0; i < capacitors_.size(); ++i) {
        const CompiledCapacitor& c = capacitors_[i];
        s.cap_v[i] = V(c.a) - V(c.b);
        s.cap_i[i] = s.u[static_cast<size_t>(c.br)];
    }
    s.mem_xdot.resize(memristors_.size());
    for (size_t i = 0; i < memristors_.size(); ++i) {
        const CompiledMemristor& m = memristors_[i];
        double x = s.u[static_cast<size_t>(m.xs)];
        double r = detail::memristance_unchecked(x, m.prm);
        double cur = (V(m.plus) - V(m.minus)) / r;
        s.mem_xdot[i] = m.prm.k() * cur * detail::window_exp(x, m.prm.window_exponent());
    }
    s.lag_sdot.assign(std::count_if(opamps_.begin(), opamps_.end(),
                                    [](const CompiledOpAmp& o) { return o.lag >= 0; }),
                      0.0); // DC equilibrium: lag state sits on its target
    return s;
}

Simulator::EngineState Simulator::step(const EngineState& from, double dt) {
    AssemblyOpts opts;
    opts.mode = Mode::Step;
    opts.integrator = cfg_.integrator;
    opts.dt = dt;
    opts.prev = &from;

    EngineState next;
    next.t = from.t + dt;
    next.u = from.u; // warm start
    newton(next.u, opts);

    // clamp memristor states, then rebuild histories from the accepted point
    for (const CompiledMemristor& m : memristors_) {
        double& x = next.u[static_cast<size_t>(m.xs)];
        x = std::clamp(x, 0.0, 1.0);
    }
    auto V = [&](int slot) { return slot < 0 ? 0.0 : next.u[static_cast<size_t>(slot)]; };

    next.cap_v.resize(capacitors_.size());
    next.cap_i.resize(capacitors_.size());
    for (size_t i = 0; i < capacitors_.size(); ++i) {
        const CompiledCapacitor& c = capacitors_[i];
        double vab = V(c.a) - V(c.b);
        next.cap_v[i] = vab;
        if (cfg_.integrator == Integrator::Trapezoidal)
            next.cap_i[i] = 2.0 * c.c / dt * (vab - from.cap_v[i]) - from.cap_i[i];
        else
            next.cap_i[i] = c.c / dt * (vab - from.cap_v[i]);
    }
    next.mem_xdot.resize(memristors_.size());
    for (size_t i = 0; i < memristors_.size(); ++i) {
        const CompiledMemristor& m = memristors_[i];
        double x = next.u[static_cast<size_t>(m.xs)];
        double r = detail::memristance_unchecked(x, m.prm);
        double cur = (V(m.plus) - V(m.minus)) / r;
        next.mem_xdot[i] = m.prm.k() * cur * detail::window_exp(x, m.prm.window_exponent());
    }
    next.lag_sdot.resize(from.lag_sdot.size());
    for (const CompiledOpAmp& o : opamps_) {
        if (o.lag < 0) continue;
        double w = 2.0 * M_PI * o.model.pole_freq;
        double target = opamp_output(V(o.inp), V(o.inn), o.model);
        next.lag_sdot[o.hist] = w * (target - next.u[static_cast<size_t>(o.lag)]);
    }

    // node-KCL bookkeeping at the accepted (clamped) point
    std::vector<double> f;
    assemble(next.u, opts, f, nullptr);
    for (size_t r = 0; r < layout_->n_nodes(); ++r)
        stats_.max_kcl_residual = std::max(stats_.max_kcl_residual, std::abs(f[r]));

    ++stats_.steps;
    stats_.min_dt = stats_.min_dt == 0.0 ? dt : std::min(stats_.min_dt, dt);
    stats_.max_dt = std::max(stats_.max_dt, dt);
    return next;
}

void Simulator::record(TraceSet& traces, const EngineState& s) const {
    traces.time.push_back(s.t);
    size_t col = 0;
    for (size_t i = 0; i < layout_->nodes.size(); ++i) traces.push_sample(col++, s.u[i]);
    size_t base = layout_->n_nodes();
    for (size_t i = 0; i < layout_->branches.size(); ++i)
        traces.push_sample(col++, s.u[base + i]);
    base += layout_->n_branches();
    for (size_t i = 0; i < layout_->states.size(); ++i)
        traces.push_sample(col++, s.u[base + i]);
    auto V = [&](int slot) { return slot < 0 ? 0.0 : s.u[static_cast<size_t>(slot)]; };
    for (const CompiledMemristor& m : memristors_) {
        double x = s.u[static_cast<size_t>(m.xs)];
        double cur = (V(m.plus) - V(m.minus)) / detail::memristance_unchecked(x, m.prm);
        traces.push_sample(col++, cur);
    }
}

TraceSet Simulator::transient(const BiasHints& hints) {
    stats_ = RunStats{};
    Solution dc = dc_operating_point(hints);
    EngineState state = initial_state(dc);

    TraceSet traces;
    for (const std::string& n : layout_->nodes) traces.add_signal("v(" + n + ")");
    for (const std::string& b : layout_->branches) traces.add_signal("i(" + b + ")");
    for (size_t i = 0; i < layout_->states.size(); ++i) {
        bool is_mem = std::any_of(memristors_.begin(), memristors_.end(),
                                  [&](const CompiledMemristor& m) {
                                      return m.name == layout_->states[i];
                                  });
        traces.add_signal((is_mem ? "x(" : "lag(") + layout_->states[i] + ")");
    }
    for (const CompiledMemristor& m : memristors_) traces.add_signal("i(" + m.name + ")");
    traces.memristors = circuit_.memristor_probes();

    record(traces, state);

    const double t_stop = cfg_.t_stop;
    if (!cfg_.adaptive) {
        const double dt = cfg_.dt;
        const size_t macro_steps =
            static_cast<size_t>(std::ceil(t_stop / dt - 1e-9));
        for (size_t k = 0; k < macro_steps; ++k) {
            const double t_target = (k + 1 == macro_steps) ? t_stop : dt * static_cast<double>(k + 1);
            double h = t_target - state.t;
            while (state.t < t_target - 1e-15 * t_stop) {
                h = std::min(h, t_target - state.t);
                try {
                    state = step(state, h);
                    h = std::min(h * 2.0, dt);
                } catch (const ConvergenceError& e) {
                    ++stats_.dt_halvings;
                    h *= 0.5;
                    if (h < cfg_.dt_min)
                        throw ConvergenceError(std::string("transient: step size underflow at t = ") +
                                                   std::to_string(state.t) + " s (" + e.what() + ")",
                                               state.t);
                }
            }
            state.t = t_target;
            record(traces, state);
        }
    } else {
        const double order = cfg_.integrator == Integrator::Trapezoidal ? 2.0 : 1.0;
        double h = cfg_.dt;
        while (state.t < t_stop - 1e-15 * t_stop) {
            h = std::clamp(h, cfg_.dt_min, cfg_.dt_max);
            h = std::min(h, t_stop - state.t);
            EngineState full, fine;
            bool solved = true;
            try {
                full = step(state, h);
                fine = step(step(state, 0.5 * h), 0.5 * h);
            } catch (const ConvergenceError&) {
                solved = false;
            }
            if (solved) {
                // truncation control over the differential states only;
                // algebraic unknowns (node voltages, comparator outputs)
                // are slaved to them and may jump at relay flips
                double err = 0.0;
                auto weigh = [&](double a, double b, double abstol) {
                    double w = abstol + cfg_.reltol * std::max(std::abs(a), std::abs(b));
                    err = std::max(err, std::abs(a - b) / w);
                };
                auto vab = [&](const EngineState& st, const CompiledCapacitor& c) {
                    double va = c.a < 0 ? 0.0 : st.u[static_cast<size_t>(c.a)];
                    double vb = c.b < 0 ? 0.0 : st.u[static_cast<size_t>(c.b)];
                    return va - vb;
                };
                for (const CompiledCapacitor& c : capacitors_)
                    weigh(vab(full, c), vab(fine, c), cfg_.abstol_voltage);
                for (const CompiledMemristor& m : memristors_)
                    weigh(full.u[static_cast<size_t>(m.xs)], fine.u[static_cast<size_t>(m.xs)],
                          1e-9);
                for (const CompiledOpAmp& o : opamps_) {
                    if (o.lag >= 0)
                        weigh(full.u[static_cast<size_t>(o.lag)],
                              fine.u[static_cast<size_t>(o.lag)], cfg_.abstol_voltage);
                }
                if (err <= 1.0) {
                    double t_new = state.t + h;
                    state = std::move(fine);
                    state.t = std::min(t_new, t_stop);
                    record(traces, state);
                    double grow = 0.9 * std::pow(std::max(err, 1e-10), -1.0 / (order + 1.0));
                    h *= std::clamp(grow, 1.0, 4.0);
                    continue;
                }
                ++stats_.rejected_steps;
                double shrink = 0.9 * std::pow(err, -1.0 / (order + 1.0));
                h *= std::clamp(shrink, 0.1, 0.9);
            } else {
                ++stats_.rejected_steps;
                h *= 0.5;
            }
            if (h < cfg_.dt_min)
                throw ConvergenceError("transient: adaptive step underflow at t = " +
                                           std::to_string(state.t) + " s",
                                       state.t);
        }
    }

    traces.stats = stats_;
    return traces;
}

} // namespace memsim
