// Seeded generator of small random networks (lines plus tapped transformers)
// with modest loading, used by cross-validation and property tests.
#pragma once

#include <numbers>
#include <random>

#include "scopf/network.hpp"
#include "scopf/power_flow.hpp"

namespace scopf::testing {

struct RandomCase {
    Network net;
    BusTargets targets;
    std::vector<TapSetting> settings;
};

inline RandomCase random_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> bus_count_dist(3, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    RandomCase rc;
    const int n = bus_count_dist(rng);
    rc.net.base_mva = 100.0;
    for (int b = 0; b < n; ++b) {
        Bus bus;
        bus.id = b + 1;
        bus.v_rated_kv = 110.0;
        bus.kind = BusKind::PowerControlled;
        rc.net.buses.push_back(bus);
    }
    rc.net.buses[0].kind = BusKind::Slack;
    // Roughly one bus in four is voltage controlled.
    for (int b = 1; b < n; ++b)
        if (unit(rng) < 0.25) rc.net.buses[static_cast<std::size_t>(b)].kind = BusKind::VoltageControlled;

    auto series_admittance = [&] {
        const double r = 0.005 + 0.02 * unit(rng);
        const double x = 0.03 + 0.12 * unit(rng);
        return 1.0 / Complex(r, x);
    };

    // Spanning tree first (guarantees connectivity), then a few extra ports.
    std::vector<std::pair<int, int>> edges;
    for (int b = 1; b < n; ++b) {
        std::uniform_int_distribution<int> prior(0, b - 1);
        edges.emplace_back(prior(rng), b);
    }
    const int extra = static_cast<int>(unit(rng) * 3.0);
    for (int e = 0; e < extra; ++e) {
        std::uniform_int_distribution<int> any(0, n - 1);
        const int a = any(rng), b = any(rng);
        if (a != b) edges.emplace_back(a, b);
    }

    for (auto [a, b] : edges) {
        TwoPort port;
        port.from_bus = a;
        port.to_bus = b;
        const Complex y_series = series_admittance();
        if (unit(rng) < 0.3) {
            // Transformer with an integer-stepped tap changer.
            port.is_transformer = true;
            port.series_from = 2.0 * y_series;
            port.series_to = 2.0 * y_series;
            port.shunt = Complex{0.0, 0.0};
            port.vector_group_k = 0;
            port.rated_ratio = Complex{1.0, 0.0};  // per-unit convention
            port.tap.voltage_step_min = -10;
            port.tap.voltage_step_max = 10;
            port.tap.phase_step_min = -10;
            port.tap.phase_step_max = 10;
            port.tap.voltage_increment = 0.0025;
            port.tap.phase_increment = 1.0 * std::numbers::pi / 180.0;
            std::uniform_int_distribution<int> step(-5, 5);
            rc.settings.push_back(TapSetting{step(rng), step(rng)});
        } else {
            // Plain line as a T-equivalent with a small capacitive shunt.
            const Complex c{0.0, 0.01 * unit(rng)};
            port.series_from = 2.0 * y_series + c;
            port.series_to = port.series_from;
            port.shunt = std::abs(c) > 0.0 ? port.series_from * c / y_series
                                           : Complex{0.0, 0.0};
            rc.settings.push_back(TapSetting{});
        }
        rc.net.ports.push_back(port);
    }

    rc.targets.p.setZero(n);
    rc.targets.q.setZero(n);
    rc.targets.v_set.setConstant(n, 1.0);
    std::uniform_real_distribution<double> load(-0.3, 0.1);
    std::uniform_real_distribution<double> setpoint(0.98, 1.04);
    for (int b = 0; b < n; ++b) {
        const Bus& bus = rc.net.buses[static_cast<std::size_t>(b)];
        if (bus.kind == BusKind::Slack) {
            rc.targets.v_set[b] = 1.0;
            continue;
        }
        rc.targets.p[b] = load(rng);
        if (bus.kind == BusKind::PowerControlled)
            rc.targets.q[b] = 0.4 * load(rng);
        else
            rc.targets.v_set[b] = setpoint(rng);
    }
    rc.net.validate();
    return rc;
}

}  // namespace scopf::testing
