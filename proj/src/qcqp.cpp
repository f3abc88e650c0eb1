#include "scopf/qcqp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scopf {

namespace {

constexpr const char* kBlockNames[kQcqpBlockCount] = {
    "tap_split",       "tap_magnitude",     "tangent",         "phase_step_anchor",
    "voltage_step_anchor", "aux_voltage_re", "aux_voltage_im", "aux_current_re",
    "aux_current_im",  "current_back_re",   "current_back_im", "current_split",
    "active_balance",  "reactive_balance",  "voltage_split",   "loss",
};

// Block lengths in units of (terminals, nodes, scalars).
struct BlockShape {
    int terminals;
    int nodes;
    int scalars;
};

constexpr BlockShape kShapes[kQcqpBlockCount] = {
    {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0},
    {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0},
    {0, 1, 0}, {0, 1, 0}, {0, 1, 0}, {0, 0, 1},
};

void require(bool ok, const char* message)
{
    if (!ok) throw std::invalid_argument(message);
}

/// Per-terminal in-phase increment: the changer acts at the to side.
double terminal_voltage_increment(const Network& net, int t)
{
    return (t % 2 == 1) ? net.ports[static_cast<std::size_t>(t / 2)].tap.voltage_increment
                        : 0.0;
}

void check_tangent_domain(double m, double phase_increment)
{
    if (!(std::abs(m * phase_increment) < std::numbers::pi / 2.0))
        throw std::domain_error("tangent linearization undefined at or beyond 90 degrees");
}

void require_state_shape(const QcqpState& state, const Network& net)
{
    const int T = net.terminal_count();
    const int N = net.bus_count();
    const bool terminals_ok =
        state.tau_r.size() == T && state.tau_i.size() == T && state.tau.size() == T &&
        state.m.size() == T && state.n.size() == T && state.u_aux_r.size() == T &&
        state.u_aux_i.size() == T && state.i_aux_r.size() == T && state.i_aux_i.size() == T &&
        state.i_r.size() == T && state.i_i.size() == T && state.i_mag.size() == T;
    const bool nodes_ok =
        state.u_r.size() == N && state.u_i.size() == N && state.u_mag.size() == N;
    require(terminals_ok, "state terminal blocks do not match the network");
    require(nodes_ok, "state nodal blocks do not match the network");
}

}  // namespace

const char* block_name(QcqpBlock block) { return kBlockNames[static_cast<int>(block)]; }

int block_size(QcqpBlock block, int terminals, int nodes)
{
    const BlockShape& s = kShapes[static_cast<int>(block)];
    return s.terminals * terminals + s.nodes * nodes + s.scalars;
}

int block_offset(QcqpBlock block, int terminals, int nodes)
{
    int offset = 0;
    for (int b = 0; b < static_cast<int>(block); ++b)
        offset += block_size(static_cast<QcqpBlock>(b), terminals, nodes);
    return offset;
}

int residual_size(int terminals, int nodes) { return 12 * terminals + 3 * nodes + 1; }

LinearizationPoint tangent_linearize(double m, const TapSpec& spec)
{
    check_tangent_domain(m, spec.phase_increment);
    LinearizationPoint lin;
    lin.m = Eigen::VectorXd::Constant(1, m);
    const double angle = m * spec.phase_increment;
    lin.t = Eigen::VectorXd::Constant(1, std::tan(angle));
    const double c = std::cos(angle);
    lin.dt_dm = Eigen::VectorXd::Constant(1, spec.phase_increment / (c * c));
    lin.n = Eigen::VectorXd::Zero(1);
    return lin;
}

LinearizationPoint linearize_terminals(const Network& net, std::span<const TapSetting> settings)
{
    require(settings.empty() || static_cast<int>(settings.size()) == net.port_count(),
            "tap settings do not match the port count");
    const int T = net.terminal_count();
    LinearizationPoint lin;
    lin.m = Eigen::VectorXd::Zero(T);
    lin.t = Eigen::VectorXd::Zero(T);
    lin.dt_dm = Eigen::VectorXd::Zero(T);
    lin.n = Eigen::VectorXd::Zero(T);
    for (int p = 0; p < net.port_count(); ++p) {
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const TapSpec& spec = net.ports[static_cast<std::size_t>(p)].tap;
        const int t = 2 * p + 1;  // changer side
        check_tangent_domain(setting.phase_step, spec.phase_increment);
        const double angle = setting.phase_step * spec.phase_increment;
        lin.m[t] = setting.phase_step;
        lin.t[t] = std::tan(angle);
        const double c = std::cos(angle);
        lin.dt_dm[t] = spec.phase_increment / (c * c);
        lin.n[t] = setting.voltage_step;
    }
    return lin;
}

Eigen::VectorXd residual(const QcqpState& state, const Network& net,
                         const Eigen::VectorXd& p0, const Eigen::VectorXd& q0,
                         const LinearizationPoint& lin)
{
    const int T = net.terminal_count();
    const int N = net.bus_count();
    require_state_shape(state, net);
    require(p0.size() == N && q0.size() == N, "injection targets do not match the bus count");
    require(lin.m.size() == T && lin.t.size() == T && lin.dt_dm.size() == T &&
                lin.n.size() == T,
            "linearization point does not match the terminal count");

    Eigen::VectorXd r(residual_size(T, N));
    const auto seg = [&](QcqpBlock b) {
        return r.segment(block_offset(b, T, N), block_size(b, T, N));
    };

    const double pf = state.power_factor;

    // Per-terminal rows.
    Eigen::VectorXd nodal_ir = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd nodal_ii = Eigen::VectorXd::Zero(N);
    double loss_sum = 0.0;
    for (int p = 0; p < net.port_count(); ++p) {
        const TwoPort& port = net.ports[static_cast<std::size_t>(p)];
        const Eigen::Matrix2cd y = rated_terminal_admittance(port);
        const Complex u_aux_from(state.u_aux_r[2 * p], state.u_aux_i[2 * p]);
        const Complex u_aux_to(state.u_aux_r[2 * p + 1], state.u_aux_i[2 * p + 1]);
        for (int side = 0; side < 2; ++side) {
            const int t = 2 * p + side;
            const int b = net.terminal_bus(t);
            const double dv = terminal_voltage_increment(net, t);
            const double tr = state.tau_r[t];
            const double ti = state.tau_i[t];

            seg(QcqpBlock::TapSplit)[t] = tr * tr + ti * ti - state.tau[t] * state.tau[t];
            seg(QcqpBlock::TapMagnitude)[t] = state.tau[t] * (1.0 + state.n[t] * dv) - 1.0;
            seg(QcqpBlock::Tangent)[t] =
                ti - tr * (lin.t[t] + lin.dt_dm[t] * (state.m[t] - lin.m[t]));
            seg(QcqpBlock::PhaseStepAnchor)[t] = state.m[t] - lin.m[t];
            seg(QcqpBlock::VoltageStepAnchor)[t] = state.n[t] - lin.n[t];

            seg(QcqpBlock::AuxVoltageRe)[t] =
                tr * state.u_r[b] - ti * state.u_i[b] - state.u_aux_r[t];
            seg(QcqpBlock::AuxVoltageIm)[t] =
                ti * state.u_r[b] + tr * state.u_i[b] - state.u_aux_i[t];

            const Complex i_aux_pred = y(side, 0) * u_aux_from + y(side, 1) * u_aux_to;
            seg(QcqpBlock::AuxCurrentRe)[t] = i_aux_pred.real() - state.i_aux_r[t];
            seg(QcqpBlock::AuxCurrentIm)[t] = i_aux_pred.imag() - state.i_aux_i[t];

            seg(QcqpBlock::CurrentBackRe)[t] =
                tr * state.i_aux_r[t] + ti * state.i_aux_i[t] - state.i_r[t];
            seg(QcqpBlock::CurrentBackIm)[t] =
                tr * state.i_aux_i[t] - ti * state.i_aux_r[t] - state.i_i[t];
            seg(QcqpBlock::CurrentSplit)[t] = state.i_r[t] * state.i_r[t] +
                                              state.i_i[t] * state.i_i[t] -
                                              state.i_mag[t] * state.i_mag[t];

            nodal_ir[b] += state.i_r[t];
            nodal_ii[b] += state.i_i[t];
            loss_sum += state.u_r[b] * state.i_r[t] + state.u_i[b] * state.i_i[t];
        }
    }

    seg(QcqpBlock::Loss)[0] = pf * loss_sum - state.p_loss;

    // Nodal balances; bus shunt currents join the terminal sums here.
    for (int b = 0; b < N; ++b) {
        const Bus& bus = net.buses[static_cast<std::size_t>(b)];
        const double wr = nodal_ir[b] + bus.g_shunt * state.u_r[b] - bus.b_shunt * state.u_i[b];
        const double wi = nodal_ii[b] + bus.g_shunt * state.u_i[b] + bus.b_shunt * state.u_r[b];
        seg(QcqpBlock::ActiveBalance)[b] =
            pf * (state.u_r[b] * wr + state.u_i[b] * wi) - p0[b];
        seg(QcqpBlock::ReactiveBalance)[b] =
            pf * (state.u_i[b] * wr - state.u_r[b] * wi) - q0[b];
        seg(QcqpBlock::VoltageSplit)[b] = state.u_r[b] * state.u_r[b] +
                                          state.u_i[b] * state.u_i[b] -
                                          state.u_mag[b] * state.u_mag[b];
    }

    return r;
}

QcqpState from_power_flow(const PowerFlowState& state, const Network& net,
                          std::span<const TapSetting> settings)
{
    require(state.converged, "cannot reformulate an unconverged power-flow state");
    require(state.v.size() == net.bus_count(), "state voltages do not match the bus count");
    require(state.terminal_current.size() == net.terminal_count(),
            "state currents do not match the terminal count");
    require(settings.empty() || static_cast<int>(settings.size()) == net.port_count(),
            "tap settings do not match the port count");

    const int T = net.terminal_count();
    QcqpState qs;
    qs.tau_r.resize(T);
    qs.tau_i.resize(T);
    qs.tau.resize(T);
    qs.m.resize(T);
    qs.n.resize(T);
    qs.u_aux_r.resize(T);
    qs.u_aux_i.resize(T);
    qs.i_aux_r.resize(T);
    qs.i_aux_i.resize(T);
    qs.i_r.resize(T);
    qs.i_i.resize(T);
    qs.i_mag.resize(T);
    qs.u_r = state.v.real();
    qs.u_i = state.v.imag();
    qs.u_mag = state.v.cwiseAbs();
    qs.p_loss = state.p_loss;
    qs.power_factor = state.power_factor;

    for (int p = 0; p < net.port_count(); ++p) {
        const TwoPort& port = net.ports[static_cast<std::size_t>(p)];
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const Complex tau = tap_ratio(port.tap, setting);
        const Eigen::Matrix2cd y = rated_terminal_admittance(port);

        Complex u_aux[2];
        for (int side = 0; side < 2; ++side) {
            const int t = 2 * p + side;
            const Complex tau_t = (side == 1) ? tau : Complex(1.0, 0.0);
            qs.tau_r[t] = tau_t.real();
            qs.tau_i[t] = tau_t.imag();
            qs.tau[t] = std::abs(tau_t);
            qs.m[t] = (side == 1) ? setting.phase_step : 0.0;
            qs.n[t] = (side == 1) ? setting.voltage_step : 0.0;

            const Complex u_term = state.v[net.terminal_bus(t)];
            u_aux[side] = tau_t * u_term;
            qs.u_aux_r[t] = u_aux[side].real();
            qs.u_aux_i[t] = u_aux[side].imag();

            qs.i_r[t] = state.terminal_current[t].real();
            qs.i_i[t] = state.terminal_current[t].imag();
            qs.i_mag[t] = std::abs(state.terminal_current[t]);
        }
        for (int side = 0; side < 2; ++side) {
            const int t = 2 * p + side;
            const Complex i_aux = y(side, 0) * u_aux[0] + y(side, 1) * u_aux[1];
            qs.i_aux_r[t] = i_aux.real();
            qs.i_aux_i[t] = i_aux.imag();
        }
    }
    return qs;
}

QcqpReport verify_solution(const PowerFlowState& state, std::span<const TapSetting> settings,
                           const Network& net)
{
    const QcqpState qs = from_power_flow(state, net, settings);
    const LinearizationPoint lin = linearize_terminals(net, settings);
    const Eigen::VectorXd r = residual(qs, net, state.p_inj, state.q_inj, lin);

    const int T = net.terminal_count();
    const int N = net.bus_count();

    QcqpReport report;
    report.blocks.reserve(kQcqpBlockCount);
    for (int b = 0; b < kQcqpBlockCount; ++b) {
        const QcqpBlock block = static_cast<QcqpBlock>(b);
        BlockCheck check;
        check.block = block_name(block);
        const int n = block_size(block, T, N);
        const int o = block_offset(block, T, N);
        for (int k = 0; k < n; ++k) {
            const double a = std::abs(r[o + k]);
            if (check.index < 0 || a > check.max_abs) {
                check.max_abs = a;
                check.index = k;
            }
        }
        report.residual_max = std::max(report.residual_max, check.max_abs);
        report.blocks.push_back(std::move(check));
    }

    // Degree-four tap-magnitude identity and its degree-two composition.
    report.quartic_identity.block = "quartic_identity";
    report.split_equivalence.block = "split_equivalence";
    for (int t = 0; t < T; ++t) {
        const double dv = terminal_voltage_increment(net, t);
        const double scale = 1.0 + qs.n[t] * dv;
        const double quartic =
            (qs.tau_r[t] * qs.tau_r[t] + qs.tau_i[t] * qs.tau_i[t]) * scale * scale - 1.0;
        const double split_a =
            qs.tau_r[t] * qs.tau_r[t] + qs.tau_i[t] * qs.tau_i[t] - qs.tau[t] * qs.tau[t];
        const double split_b = qs.tau[t] * scale - 1.0;
        const double composed = split_a * scale * scale + split_b * (qs.tau[t] * scale + 1.0);
        if (std::abs(quartic) >= report.quartic_identity.max_abs) {
            report.quartic_identity.max_abs = std::abs(quartic);
            report.quartic_identity.index = t;
        }
        const double defect = std::abs(quartic - composed);
        if (defect >= report.split_equivalence.max_abs) {
            report.split_equivalence.max_abs = defect;
            report.split_equivalence.index = t;
        }
    }

    report.worst = std::max({report.residual_max, report.quartic_identity.max_abs,
                             report.split_equivalence.max_abs});
    return report;
}

}  // namespace scopf
