#include "scopf/power_flow.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace scopf {

namespace {

struct BusPartition {
    std::vector<int> angle_index;  // per bus, -1 at slack
    std::vector<int> mag_index;    // per bus, -1 unless power-controlled
    int n_angle = 0;
    int n_mag = 0;
};

BusPartition partition(const Network& net)
{
    BusPartition part;
    const int n = net.bus_count();
    part.angle_index.assign(static_cast<std::size_t>(n), -1);
    part.mag_index.assign(static_cast<std::size_t>(n), -1);
    for (int b = 0; b < n; ++b) {
        const BusKind kind = net.buses[static_cast<std::size_t>(b)].kind;
        if (kind != BusKind::Slack) part.angle_index[static_cast<std::size_t>(b)] = part.n_angle++;
    }
    for (int b = 0; b < n; ++b) {
        if (net.buses[static_cast<std::size_t>(b)].kind == BusKind::PowerControlled)
            part.mag_index[static_cast<std::size_t>(b)] = part.n_angle + part.n_mag++;
    }
    return part;
}

// Flat-start angles: propagate the fixed ratio rotations (vector group plus
// quadrature taps) outward from the slack over a spanning tree, so the start
// point sits on the solution branch selected by the rated phase shifts.
std::vector<double> shift_propagated_angles(const Network& net,
                                            std::span<const TapSetting> settings)
{
    const int n = net.bus_count();
    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
    for (std::size_t p = 0; p < net.ports.size(); ++p) {
        const TwoPort& port = net.ports[p];
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const double shift = std::arg(port.rated_ratio) +
                             setting.phase_step * port.tap.phase_increment;
        adj[static_cast<std::size_t>(port.from_bus)].emplace_back(port.to_bus, -shift);
        adj[static_cast<std::size_t>(port.to_bus)].emplace_back(port.from_bus, +shift);
    }

    std::vector<double> angle(static_cast<std::size_t>(n), 0.0);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    const int root = std::max(net.slack_index(), 0);
    std::vector<int> stack{root};
    seen[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
        const int b = stack.back();
        stack.pop_back();
        for (auto [nb, delta] : adj[static_cast<std::size_t>(b)]) {
            if (seen[static_cast<std::size_t>(nb)]) continue;
            seen[static_cast<std::size_t>(nb)] = 1;
            angle[static_cast<std::size_t>(nb)] = angle[static_cast<std::size_t>(b)] + delta;
            stack.push_back(nb);
        }
    }
    return angle;
}

// Realized injections V .* conj(Y v), split into active and reactive parts.
void compute_injections(const Eigen::SparseMatrix<Complex>& y, const Eigen::VectorXd& vm,
                        const Eigen::VectorXd& va, Eigen::VectorXd& p, Eigen::VectorXd& q)
{
    const int n = static_cast<int>(y.rows());
    p.setZero(n);
    q.setZero(n);
    for (int k = 0; k < y.outerSize(); ++k) {
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(y, k); it; ++it) {
            const int i = static_cast<int>(it.row());
            const double g = it.value().real();
            const double b = it.value().imag();
            const double theta = va[i] - va[k];
            const double c = std::cos(theta), s = std::sin(theta);
            const double vv = vm[i] * vm[k];
            p[i] += vv * (g * c + b * s);
            q[i] += vv * (g * s - b * c);
        }
    }
}

}  // namespace

PowerFlowState solve_power_flow(const Network& net, std::span<const TapSetting> settings,
                                const BusTargets& targets, const PowerFlowSpec& spec)
{
    const int n = net.bus_count();
    if (targets.p.size() != n || targets.q.size() != n || targets.v_set.size() != n)
        throw std::invalid_argument("bus targets must be sized per bus");
    if (!(spec.tolerance > 0.0) || spec.max_iter < 1)
        throw std::invalid_argument("power flow spec: tolerance > 0 and max_iter >= 1 required");

    const Eigen::SparseMatrix<Complex> y = assemble_nodal_admittance(net, settings);
    const BusPartition part = partition(net);
    const double pf = spec.power_factor;

    PowerFlowState state;
    state.power_factor = pf;

    // Start point: warm voltages when provided, otherwise flat. Magnitude
    // targets at the slack and voltage-controlled buses are re-imposed
    // either way, as is the zero slack angle.
    Eigen::VectorXd vm(n), va(n);
    const bool warm = spec.warm_start != nullptr && spec.warm_start->size() == n;
    const std::vector<double> flat_angle =
        warm ? std::vector<double>{} : shift_propagated_angles(net, settings);
    for (int b = 0; b < n; ++b) {
        const BusKind kind = net.buses[static_cast<std::size_t>(b)].kind;
        if (warm) {
            vm[b] = std::abs((*spec.warm_start)[b]);
            va[b] = std::arg((*spec.warm_start)[b]);
        } else {
            vm[b] = 1.0;
            va[b] = flat_angle[static_cast<std::size_t>(b)];
        }
        if (kind != BusKind::PowerControlled) vm[b] = targets.v_set[b];
        if (kind == BusKind::Slack) va[b] = 0.0;
    }

    // Specified injections on the solver scale.
    const Eigen::VectorXd p_spec = targets.p / pf;
    const Eigen::VectorXd q_spec = targets.q / pf;

    const int n_unknown = part.n_angle + part.n_mag;
    Eigen::VectorXd p_calc, q_calc;
    Eigen::VectorXd mismatch(n_unknown);
    Eigen::MatrixXd jac(n_unknown, n_unknown);

    int iterations = 0;
    bool converged = false;
    double worst = std::numeric_limits<double>::infinity();

    for (int it = 0; it <= spec.max_iter; ++it) {
        compute_injections(y, vm, va, p_calc, q_calc);

        worst = 0.0;
        for (int b = 0; b < n; ++b) {
            const int ai = part.angle_index[static_cast<std::size_t>(b)];
            const int mi = part.mag_index[static_cast<std::size_t>(b)];
            if (ai >= 0) {
                mismatch[ai] = p_spec[b] - p_calc[b];
                worst = std::max(worst, std::abs(mismatch[ai]));
            }
            if (mi >= 0) {
                mismatch[mi] = q_spec[b] - q_calc[b];
                worst = std::max(worst, std::abs(mismatch[mi]));
            }
        }

        if (worst <= spec.tolerance) {
            converged = true;
            break;
        }
        if (it == spec.max_iter || n_unknown == 0) break;

        jac.setZero();
        for (int k = 0; k < y.outerSize(); ++k) {
            for (Eigen::SparseMatrix<Complex>::InnerIterator inner(y, k); inner; ++inner) {
                const int i = static_cast<int>(inner.row());
                const int ai = part.angle_index[static_cast<std::size_t>(i)];
                const int mi = part.mag_index[static_cast<std::size_t>(i)];
                if (ai < 0 && mi < 0) continue;
                const int ak = part.angle_index[static_cast<std::size_t>(k)];
                const int mk = part.mag_index[static_cast<std::size_t>(k)];
                const double g = inner.value().real();
                const double b = inner.value().imag();
                if (i == k) {
                    const double vi = vm[i];
                    if (ai >= 0) {
                        if (ak >= 0) jac(ai, ak) += -q_calc[i] - b * vi * vi;
                        if (mk >= 0) jac(ai, mk) += p_calc[i] / vi + g * vi;
                    }
                    if (mi >= 0) {
                        if (ak >= 0) jac(mi, ak) += p_calc[i] - g * vi * vi;
                        if (mk >= 0) jac(mi, mk) += q_calc[i] / vi - b * vi;
                    }
                } else {
                    const double theta = va[i] - va[k];
                    const double c = std::cos(theta), s = std::sin(theta);
                    const double a_ik = vm[i] * vm[k] * (g * c + b * s);
                    const double b_ik = vm[i] * vm[k] * (g * s - b * c);
                    if (ai >= 0) {
                        if (ak >= 0) jac(ai, ak) += b_ik;
                        if (mk >= 0) jac(ai, mk) += a_ik / vm[k];
                    }
                    if (mi >= 0) {
                        if (ak >= 0) jac(mi, ak) += -a_ik;
                        if (mk >= 0) jac(mi, mk) += b_ik / vm[k];
                    }
                }
            }
        }

        const Eigen::VectorXd step = jac.partialPivLu().solve(mismatch);
        if (!step.allFinite()) break;  // singular Jacobian

        for (int b = 0; b < n; ++b) {
            const int ai = part.angle_index[static_cast<std::size_t>(b)];
            const int mi = part.mag_index[static_cast<std::size_t>(b)];
            if (ai >= 0) va[b] += step[ai];
            if (mi >= 0) vm[b] += step[mi];
        }
        ++iterations;
    }

    state.v.resize(n);
    for (int b = 0; b < n; ++b) state.v[b] = std::polar(vm[b], va[b]);
    state.converged = converged;
    state.iterations = iterations;
    state.max_mismatch = worst;
    state.p_inj = pf * p_calc;
    state.q_inj = pf * q_calc;
    state.terminal_current = terminal_currents(net, settings, state.v);

    // Nodal loss: active power flowing from the buses into the two-ports.
    double loss = 0.0;
    for (int t = 0; t < net.terminal_count(); ++t)
        loss += (state.v[net.terminal_bus(t)] * std::conj(state.terminal_current[t])).real();
    state.p_loss = pf * loss;
    return state;
}

Eigen::VectorXcd terminal_currents(const Network& net, std::span<const TapSetting> settings,
                                   const Eigen::VectorXcd& v)
{
    if (v.size() != net.bus_count())
        throw std::invalid_argument("voltage vector must be sized per bus");
    if (!settings.empty() && settings.size() != net.ports.size())
        throw std::invalid_argument("tap settings must be indexed per port");

    Eigen::VectorXcd current(net.terminal_count());
    for (std::size_t p = 0; p < net.ports.size(); ++p) {
        const TwoPort& port = net.ports[p];
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const Eigen::Matrix2cd y = terminal_admittance(port, setting);
        const Eigen::Vector2cd vt(v[port.from_bus], v[port.to_bus]);
        const Eigen::Vector2cd it = y * vt;
        current[static_cast<Eigen::Index>(2 * p)] = it(0);
        current[static_cast<Eigen::Index>(2 * p + 1)] = it(1);
    }
    return current;
}

double total_losses(const PowerFlowState& state, const Network& net)
{
    if (!state.converged)
        throw std::invalid_argument("losses are defined on converged states only");
    double loss = 0.0;
    for (int t = 0; t < net.terminal_count(); ++t)
        loss += (state.v[net.terminal_bus(t)] * std::conj(state.terminal_current[t])).real();
    return state.power_factor * loss * net.base_mva;
}

Eigen::VectorXd branch_losses(const Network& net, std::span<const TapSetting> settings,
                              const Eigen::VectorXcd& v, double power_factor)
{
    Eigen::VectorXd losses(net.port_count());
    for (std::size_t p = 0; p < net.ports.size(); ++p) {
        const TwoPort& port = net.ports[p];
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const Eigen::Matrix2cd y = terminal_admittance(port, setting);
        const Eigen::Vector2cd vt(v[port.from_bus], v[port.to_bus]);
        const Eigen::Vector2cd it = y * vt;
        losses[static_cast<Eigen::Index>(p)] =
            power_factor *
            ((vt(0) * std::conj(it(0))).real() + (vt(1) * std::conj(it(1))).real());
    }
    return losses;
}

}  // namespace scopf
