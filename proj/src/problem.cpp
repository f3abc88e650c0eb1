#include "scopf/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace scopf {

namespace {

bool bus_is_voltage_holding(const Bus& bus)
{
    return bus.kind != BusKind::PowerControlled;
}

void require_config_shapes(const Network& net, const ScopfConfig& cfg)
{
    const int n = net.bus_count();
    if (cfg.load_p.size() != n || cfg.load_q.size() != n || cfg.v_set0.size() != n)
        throw std::invalid_argument("config per-bus vectors must match the bus count");
    for (const Resource& r : cfg.resources) {
        if (r.bus < 0 || r.bus >= n)
            throw std::invalid_argument("resource " + r.label + ": bus index out of range");
        if (!(r.p_min <= r.p_max) || !(r.q_min <= r.q_max))
            throw std::invalid_argument("resource " + r.label + ": inverted capability bounds");
        if (r.cost < 0.0)
            throw std::invalid_argument("resource " + r.label + ": negative cost");
    }
    if (!(cfg.penalty.voltage > 0.0) || !(cfg.penalty.current > 0.0) ||
        !(cfg.penalty.reactive > 0.0))
        throw std::invalid_argument("penalty weights must be positive");
    if (cfg.c_loss < 0.0) throw std::invalid_argument("loss cost must be nonnegative");
}

}  // namespace

double quantize_tap(double x)
{
    return std::floor(std::ceil(2.0 * x) / 2.0);
}

Eigen::VectorXd ControlLayout::lower_bounds() const
{
    Eigen::VectorXd lb(size());
    for (int d = 0; d < size(); ++d) lb[d] = dims[static_cast<std::size_t>(d)].lower;
    return lb;
}

Eigen::VectorXd ControlLayout::upper_bounds() const
{
    Eigen::VectorXd ub(size());
    for (int d = 0; d < size(); ++d) ub[d] = dims[static_cast<std::size_t>(d)].upper;
    return ub;
}

std::vector<char> ControlLayout::integer_mask() const
{
    std::vector<char> mask(dims.size());
    for (std::size_t d = 0; d < dims.size(); ++d) mask[d] = dims[d].integer ? 1 : 0;
    return mask;
}

ControlVector ControlLayout::neutral(const ScopfConfig& cfg) const
{
    ControlVector c;
    c.dp = Eigen::VectorXd::Zero(resource_count);
    c.dq = Eigen::VectorXd::Zero(resource_count);
    c.v_set = Eigen::VectorXd::Zero(bus_count);
    for (const ControlDim& dim : dims)
        if (dim.cls == ControlClass::VoltageSetpoint) c.v_set[dim.bus] = cfg.v_set0[dim.bus];
    c.taps.assign(static_cast<std::size_t>(port_count), TapSetting{});
    return c;
}

ControlVector ControlLayout::unflatten(const Eigen::VectorXd& x, const ScopfConfig& cfg) const
{
    if (x.size() != size())
        throw std::invalid_argument("flat control vector has the wrong dimension");
    ControlVector c = neutral(cfg);
    for (int d = 0; d < size(); ++d) {
        const ControlDim& dim = dims[static_cast<std::size_t>(d)];
        switch (dim.cls) {
            case ControlClass::ActiveRedispatch: c.dp[dim.resource] = x[d]; break;
            case ControlClass::ReactiveRedispatch: c.dq[dim.resource] = x[d]; break;
            case ControlClass::VoltageSetpoint: c.v_set[dim.bus] = x[d]; break;
            case ControlClass::TapInPhase:
                c.taps[static_cast<std::size_t>(dim.port)].voltage_step =
                    static_cast<int>(quantize_tap(x[d]));
                break;
            case ControlClass::TapQuadrature:
                c.taps[static_cast<std::size_t>(dim.port)].phase_step =
                    static_cast<int>(quantize_tap(x[d]));
                break;
        }
    }
    return c;
}

Eigen::VectorXd ControlLayout::flatten(const ControlVector& controls) const
{
    Eigen::VectorXd x(size());
    for (int d = 0; d < size(); ++d) {
        const ControlDim& dim = dims[static_cast<std::size_t>(d)];
        switch (dim.cls) {
            case ControlClass::ActiveRedispatch: x[d] = controls.dp[dim.resource]; break;
            case ControlClass::ReactiveRedispatch: x[d] = controls.dq[dim.resource]; break;
            case ControlClass::VoltageSetpoint: x[d] = controls.v_set[dim.bus]; break;
            case ControlClass::TapInPhase:
                x[d] = controls.taps[static_cast<std::size_t>(dim.port)].voltage_step;
                break;
            case ControlClass::TapQuadrature:
                x[d] = controls.taps[static_cast<std::size_t>(dim.port)].phase_step;
                break;
        }
    }
    return x;
}

ControlLayout ControlLayout::build(const Network& net, const ScopfConfig& cfg)
{
    require_config_shapes(net, cfg);
    ControlLayout layout;
    layout.bus_count = net.bus_count();
    layout.resource_count = static_cast<int>(cfg.resources.size());
    layout.port_count = net.port_count();

    const int slack = net.slack_index();
    for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
        const Resource& res = cfg.resources[r];
        if (res.bus == slack) continue;  // the slack plant absorbs the balance
        const double lo = res.p_min - res.p_sched;
        const double hi = res.p_max - res.p_sched;
        if (lo == 0.0 && hi == 0.0) continue;
        layout.dims.push_back({.cls = ControlClass::ActiveRedispatch,
                               .label = "dp:" + res.label,
                               .lower = lo,
                               .upper = hi,
                               .integer = false,
                               .resource = static_cast<int>(r)});
    }
    for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
        const Resource& res = cfg.resources[r];
        // Reactive redispatch is a target only where Q is specified, i.e.
        // at power-controlled buses; elsewhere Q is a solver outcome.
        if (net.buses[static_cast<std::size_t>(res.bus)].kind != BusKind::PowerControlled)
            continue;
        const double lo = res.q_min - res.q_sched;
        const double hi = res.q_max - res.q_sched;
        if (lo == 0.0 && hi == 0.0) continue;
        layout.dims.push_back({.cls = ControlClass::ReactiveRedispatch,
                               .label = "dq:" + res.label,
                               .lower = lo,
                               .upper = hi,
                               .integer = false,
                               .resource = static_cast<int>(r)});
    }
    for (int b = 0; b < net.bus_count(); ++b) {
        const Bus& bus = net.buses[static_cast<std::size_t>(b)];
        if (!bus_is_voltage_holding(bus)) continue;
        layout.dims.push_back({.cls = ControlClass::VoltageSetpoint,
                               .label = "v:" + std::to_string(bus.id),
                               .lower = bus.v_min,
                               .upper = bus.v_max,
                               .integer = false,
                               .bus = b});
    }
    for (int p = 0; p < net.port_count(); ++p) {
        const TapSpec& tap = net.ports[static_cast<std::size_t>(p)].tap;
        if (!tap.has_in_phase_range()) continue;
        layout.dims.push_back({.cls = ControlClass::TapInPhase,
                               .label = "n:" + net.ports[static_cast<std::size_t>(p)].label,
                               .lower = static_cast<double>(tap.voltage_step_min),
                               .upper = static_cast<double>(tap.voltage_step_max),
                               .integer = true,
                               .port = p});
    }
    for (int p = 0; p < net.port_count(); ++p) {
        const TapSpec& tap = net.ports[static_cast<std::size_t>(p)].tap;
        if (!tap.has_quadrature_range()) continue;
        layout.dims.push_back({.cls = ControlClass::TapQuadrature,
                               .label = "m:" + net.ports[static_cast<std::size_t>(p)].label,
                               .lower = static_cast<double>(tap.phase_step_min),
                               .upper = static_cast<double>(tap.phase_step_max),
                               .integer = true,
                               .port = p});
    }
    return layout;
}

double objective(const PowerFlowState& state, const ControlVector& controls,
                 const ScopfConfig& cfg, const Network& net)
{
    if (!state.converged)
        throw std::invalid_argument("objective is defined on converged states only");
    double value = cfg.c_loss * state.p_loss * net.base_mva;
    for (std::size_t r = 0; r < cfg.resources.size(); ++r) {
        const double dp = controls.dp[static_cast<Eigen::Index>(r)];
        value += cfg.resources[r].cost * (cfg.redispatch_absolute ? std::abs(dp) : dp);
    }
    return value;
}

ConstraintReport check_constraints(const PowerFlowState& state, const ControlVector& controls,
                                   const ScopfConfig& cfg, const Network& net)
{
    (void)controls;
    const int n = net.bus_count();
    ConstraintReport report;
    report.voltage_excess = Eigen::VectorXd::Zero(n);
    report.current_excess = Eigen::VectorXd::Zero(net.terminal_count());
    report.reactive_excess = Eigen::VectorXd::Zero(n);
    report.converged = state.converged;
    if (!state.converged) {
        // Maximally infeasible: dominate every converged assignment.
        report.worst = std::numeric_limits<double>::infinity();
        report.feasible = false;
        return report;
    }

    for (int b = 0; b < n; ++b) {
        const Bus& bus = net.buses[static_cast<std::size_t>(b)];
        const double vm = std::abs(state.v[b]);
        report.voltage_excess[b] = std::max({0.0, vm - bus.v_max, bus.v_min - vm});
    }
    for (int t = 0; t < net.terminal_count(); ++t) {
        const double limit = net.ports[static_cast<std::size_t>(t / 2)].i_max;
        if (std::isfinite(limit))
            report.current_excess[t] =
                std::max(0.0, std::abs(state.terminal_current[t]) - limit);
    }

    // Reactive outcome of the plants at each voltage-holding bus against the
    // aggregated capability band, in p.u. on the system base.
    Eigen::VectorXd q_lo = Eigen::VectorXd::Zero(n), q_hi = Eigen::VectorXd::Zero(n);
    std::vector<char> has_plant(static_cast<std::size_t>(n), 0);
    for (const Resource& res : cfg.resources) {
        if (net.buses[static_cast<std::size_t>(res.bus)].kind == BusKind::PowerControlled)
            continue;
        has_plant[static_cast<std::size_t>(res.bus)] = 1;
        q_lo[res.bus] += res.q_min / net.base_mva;
        q_hi[res.bus] += res.q_max / net.base_mva;
    }
    for (int b = 0; b < n; ++b) {
        if (!has_plant[static_cast<std::size_t>(b)]) continue;
        const double q_gen = state.q_inj[b] + cfg.load_q[b];
        report.reactive_excess[b] = std::max({0.0, q_gen - q_hi[b], q_lo[b] - q_gen});
    }

    report.worst = std::max({report.voltage_excess.maxCoeff(),
                             report.current_excess.size() > 0
                                 ? report.current_excess.maxCoeff()
                                 : 0.0,
                             report.reactive_excess.maxCoeff()});
    report.feasible = report.worst <= cfg.feasibility_tol;
    return report;
}

double fitness(const PowerFlowState& state, const ControlVector& controls,
               const ScopfConfig& cfg, const Network& net)
{
    if (!state.converged) return cfg.unconverged_sentinel;
    const ConstraintReport report = check_constraints(state, controls, cfg, net);
    const double g = cfg.penalty.voltage * report.voltage_excess.squaredNorm() +
                     cfg.penalty.current * report.current_excess.squaredNorm() +
                     cfg.penalty.reactive * report.reactive_excess.squaredNorm();
    return objective(state, controls, cfg, net) + g;
}

ScopfProblem::ScopfProblem(Network net, ScopfConfig cfg)
    : net_(std::move(net)), cfg_(std::move(cfg))
{
    net_.validate();
    require_config_shapes(net_, cfg_);
    cfg_.flow.power_factor = cfg_.power_factor;
    cfg_.flow.warm_start = nullptr;
    layout_ = ControlLayout::build(net_, cfg_);

    const ControlVector base = layout_.neutral(cfg_);
    base_targets_ = targets_for(base);
    base_state_ = solve_power_flow(net_, base.taps, base_targets_, cfg_.flow);
    if (!base_state_.converged)
        throw std::runtime_error("base-case power flow did not converge");
}

BusTargets ScopfProblem::targets_for(const ControlVector& controls) const
{
    const int n = net_.bus_count();
    BusTargets t;
    t.p = -cfg_.load_p;
    t.q = -cfg_.load_q;
    t.v_set = cfg_.v_set0;
    for (std::size_t r = 0; r < cfg_.resources.size(); ++r) {
        const Resource& res = cfg_.resources[r];
        const double p = res.p_sched + controls.dp[static_cast<Eigen::Index>(r)];
        const double q = res.q_sched + controls.dq[static_cast<Eigen::Index>(r)];
        t.p[res.bus] += p / net_.base_mva;
        t.q[res.bus] += q / net_.base_mva;
    }
    for (int b = 0; b < n; ++b)
        if (bus_is_voltage_holding(net_.buses[static_cast<std::size_t>(b)]) &&
            controls.v_set.size() == n)
            t.v_set[b] = controls.v_set[b];
    return t;
}

PowerFlowState ScopfProblem::solve(const ControlVector& controls) const
{
    PowerFlowSpec spec = cfg_.flow;
    if (base_state_.converged) spec.warm_start = &base_state_.v;
    return solve_power_flow(net_, controls.taps, targets_for(controls), spec);
}

Evaluation ScopfProblem::evaluate_full(const ControlVector& controls) const
{
    Evaluation ev;
    ev.state = solve(controls);
    ev.report = check_constraints(ev.state, controls, cfg_, net_);
    if (ev.state.converged) ev.objective_value = objective(ev.state, controls, cfg_, net_);
    ev.fitness_value = fitness(ev.state, controls, cfg_, net_);
    return ev;
}

double ScopfProblem::evaluate(const Eigen::VectorXd& x) const
{
    const ControlVector controls = layout_.unflatten(x, cfg_);
    const PowerFlowState state = solve(controls);
    return fitness(state, controls, cfg_, net_);
}

PsoProblem make_swarm_problem(const ScopfProblem& problem, const PsoHyperparameters& hyper)
{
    const ControlLayout& layout = problem.layout();
    PsoProblem p;
    p.lower = layout.lower_bounds();
    p.upper = layout.upper_bounds();
    p.integer_dims = layout.integer_mask();
    p.speed_coefficient.resize(layout.size());
    for (int d = 0; d < layout.size(); ++d) {
        switch (layout.dims[static_cast<std::size_t>(d)].cls) {
            case ControlClass::ActiveRedispatch:
                p.speed_coefficient[d] = hyper.z_active_redispatch;
                break;
            case ControlClass::ReactiveRedispatch:
                p.speed_coefficient[d] = hyper.z_reactive_redispatch;
                break;
            case ControlClass::VoltageSetpoint:
                p.speed_coefficient[d] = hyper.z_voltage;
                break;
            case ControlClass::TapInPhase:
                p.speed_coefficient[d] = hyper.z_in_phase;
                break;
            case ControlClass::TapQuadrature:
                p.speed_coefficient[d] = hyper.z_quadrature;
                break;
        }
    }
    p.fitness = [&problem](const Eigen::VectorXd& x) { return problem.evaluate(x); };
    return p;
}

}  // namespace scopf
