#include "scopf/network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace scopf {

namespace {

constexpr double kDegenerateTol = 1e-14;

}  // namespace

int Network::slack_index() const
{
    for (int i = 0; i < bus_count(); ++i)
        if (buses[static_cast<std::size_t>(i)].kind == BusKind::Slack) return i;
    return -1;
}

int Network::bus_index(int external_id) const
{
    for (int i = 0; i < bus_count(); ++i)
        if (buses[static_cast<std::size_t>(i)].id == external_id) return i;
    return -1;
}

bool Network::is_connected() const
{
    const int n = bus_count();
    if (n == 0) return false;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const TwoPort& p : ports) {
        adj[static_cast<std::size_t>(p.from_bus)].push_back(p.to_bus);
        adj[static_cast<std::size_t>(p.to_bus)].push_back(p.from_bus);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int b = stack.back();
        stack.pop_back();
        for (int nb : adj[static_cast<std::size_t>(b)]) {
            if (!seen[static_cast<std::size_t>(nb)]) {
                seen[static_cast<std::size_t>(nb)] = 1;
                ++reached;
                stack.push_back(nb);
            }
        }
    }
    return reached == n;
}

Eigen::SparseMatrix<double> Network::incidence() const
{
    Eigen::SparseMatrix<double> inc(bus_count(), terminal_count());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(terminal_count()));
    for (int t = 0; t < terminal_count(); ++t)
        trip.emplace_back(terminal_bus(t), t, 1.0);
    inc.setFromTriplets(trip.begin(), trip.end());
    return inc;
}

void Network::validate() const
{
    if (buses.empty()) throw std::invalid_argument("network has no buses");
    int slack_count = 0;
    for (const Bus& b : buses) {
        if (b.kind == BusKind::Slack) ++slack_count;
        if (!(b.v_min < b.v_max))
            throw std::invalid_argument("bus " + std::to_string(b.id) +
                                        ": voltage bounds must satisfy v_min < v_max");
    }
    if (slack_count != 1)
        throw std::invalid_argument("network must declare exactly one slack bus, found " +
                                    std::to_string(slack_count));
    for (const TwoPort& p : ports) {
        if (p.from_bus < 0 || p.from_bus >= bus_count() || p.to_bus < 0 ||
            p.to_bus >= bus_count())
            throw std::invalid_argument("port " + p.label + ": endpoint out of range");
        if (p.from_bus == p.to_bus)
            throw std::invalid_argument("port " + p.label + ": endpoints coincide");
        if (!(p.i_max > 0.0))
            throw std::invalid_argument("port " + p.label + ": i_max must be positive");
        if (!p.is_transformer && (p.rated_ratio != Complex(1.0, 0.0) || !p.tap.is_null()))
            throw std::invalid_argument("port " + p.label +
                                        ": plain line must have unit ratio and null tap spec");
        const TapSpec& t = p.tap;
        if (t.voltage_step_min > 0 || t.voltage_step_max < 0 || t.phase_step_min > 0 ||
            t.phase_step_max < 0)
            throw std::invalid_argument("port " + p.label +
                                        ": tap ranges must bracket the neutral step");
    }
    if (!is_connected()) throw std::invalid_argument("network graph is not connected");
}

Complex rated_ratio(double v_from_rated, double v_to_rated, int vector_group_k)
{
    if (!(v_to_rated > 0.0) || !(v_from_rated > 0.0))
        throw std::invalid_argument("rated voltages must be positive");
    if (!(v_from_rated > v_to_rated))
        throw std::invalid_argument("transformer rated ratio requires the higher voltage first");
    if (vector_group_k < 0 || vector_group_k > 11)
        throw std::invalid_argument("vector group code must lie in [0, 11]");
    const double angle = vector_group_k * (std::numbers::pi / 6.0);
    return (v_from_rated / v_to_rated) * std::polar(1.0, angle);
}

Complex tap_ratio(const TapSpec& spec, const TapSetting& setting)
{
    const double denom = 1.0 + setting.voltage_step * spec.voltage_increment;
    if (std::abs(denom) < kDegenerateTol)
        throw std::domain_error("tap ratio denominator vanishes at voltage step " +
                                std::to_string(setting.voltage_step));
    return std::polar(1.0, setting.phase_step * spec.phase_increment) / denom;
}

Eigen::Matrix2cd rated_terminal_admittance(const TwoPort& port)
{
    const Complex denom = port.series_from + port.series_to + port.shunt;
    if (std::abs(denom) < kDegenerateTol)
        throw std::domain_error("port " + port.label + ": T-equivalent denominator is singular");
    const Complex tau = port.rated_ratio;
    Eigen::Matrix2cd y;
    y(0, 0) = port.series_from * (port.series_to + port.shunt) / denom;
    y(0, 1) = -tau * port.series_from * port.series_to / denom;
    y(1, 0) = -std::conj(tau) * port.series_from * port.series_to / denom;
    y(1, 1) = std::norm(tau) * port.series_to * (port.series_from + port.shunt) / denom;
    return y;
}

Eigen::Matrix2cd terminal_admittance(const TwoPort& port, const TapSetting& setting)
{
    Eigen::Matrix2cd y = rated_terminal_admittance(port);
    if (setting.voltage_step == 0 && setting.phase_step == 0) return y;
    const Complex tau = tap_ratio(port.tap, setting);
    y(0, 1) *= tau;
    y(1, 0) *= std::conj(tau);
    y(1, 1) *= std::norm(tau);
    return y;
}

Eigen::SparseMatrix<Complex> assemble_nodal_admittance(const Network& net,
                                                       std::span<const TapSetting> settings)
{
    if (!settings.empty() && settings.size() != net.ports.size())
        throw std::invalid_argument("tap settings must be indexed per port");
    if (!net.is_connected())
        throw std::invalid_argument("cannot assemble admittance of a disconnected network");

    const int n = net.bus_count();
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(4 * net.ports.size() + net.buses.size());

    for (std::size_t p = 0; p < net.ports.size(); ++p) {
        const TwoPort& port = net.ports[p];
        const TapSetting setting = settings.empty() ? TapSetting{} : settings[p];
        const Eigen::Matrix2cd y = terminal_admittance(port, setting);
        const int bi = port.from_bus;
        const int bj = port.to_bus;
        trip.emplace_back(bi, bi, y(0, 0));
        trip.emplace_back(bi, bj, y(0, 1));
        trip.emplace_back(bj, bi, y(1, 0));
        trip.emplace_back(bj, bj, y(1, 1));
    }
    for (int b = 0; b < n; ++b) {
        const Bus& bus = net.buses[static_cast<std::size_t>(b)];
        if (bus.g_shunt != 0.0 || bus.b_shunt != 0.0)
            trip.emplace_back(b, b, Complex(bus.g_shunt, bus.b_shunt));
    }

    Eigen::SparseMatrix<Complex> y_nn(n, n);
    y_nn.setFromTriplets(trip.begin(), trip.end());
    return y_nn;
}

}  // namespace scopf
