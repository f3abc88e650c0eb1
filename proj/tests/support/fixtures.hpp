#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "scopf/network.hpp"
#include "scopf/power_flow.hpp"

namespace scopf::testing {

// Two buses joined by a series line 1/(0.01 + j0.1), unit load at bus 2.
inline Network two_bus_net()
{
    Network net;
    net.buses.push_back({.id = 1, .kind = BusKind::Slack, .v_rated_kv = 110.0});
    net.buses.push_back({.id = 2, .kind = BusKind::PowerControlled, .v_rated_kv = 110.0});
    TwoPort port;
    port.from_bus = 0;
    port.to_bus = 1;
    const Complex y_series = 1.0 / Complex(0.01, 0.1);
    port.series_from = 2.0 * y_series;
    port.series_to = 2.0 * y_series;
    port.label = "1-2";
    net.ports.push_back(port);
    return net;
}

inline BusTargets two_bus_targets()
{
    BusTargets t;
    t.p.resize(2);
    t.q.resize(2);
    t.v_set.resize(2);
    t.p << 0.0, -1.0;
    t.q << 0.0, -0.2;
    t.v_set << 1.0, 1.0;
    return t;
}

// Three buses: a line with charging from the slack, then a transformer with
// vector group 5 and taps at n=2 (in-phase), m=1 (quadrature).
inline Network three_bus_net()
{
    Network net;
    net.buses.push_back({.id = 1, .kind = BusKind::Slack, .v_rated_kv = 110.0});
    net.buses.push_back({.id = 2, .kind = BusKind::PowerControlled, .v_rated_kv = 110.0});
    net.buses.push_back({.id = 3, .kind = BusKind::PowerControlled, .v_rated_kv = 20.0});

    TwoPort line;
    line.from_bus = 0;
    line.to_bus = 1;
    const Complex ys = 1.0 / Complex(0.02, 0.06);
    const Complex c{0.0, 0.02};
    line.series_from = 2.0 * ys + c;
    line.series_to = line.series_from;
    line.shunt = line.series_from * c / ys;
    line.label = "1-2";
    net.ports.push_back(line);

    TwoPort trafo;
    trafo.from_bus = 1;
    trafo.to_bus = 2;
    trafo.is_transformer = true;
    trafo.series_from = 2.0 / Complex(0.01, 0.08);
    trafo.series_to = 2.0 / Complex(0.012, 0.09);
    trafo.shunt = 1.0 / Complex(0.5, 20.0);
    trafo.vector_group_k = 5;
    trafo.rated_ratio = std::polar(1.0, 5.0 * std::numbers::pi / 6.0);
    trafo.tap.voltage_step_min = -10;
    trafo.tap.voltage_step_max = 10;
    trafo.tap.phase_step_min = -10;
    trafo.tap.phase_step_max = 10;
    trafo.tap.voltage_increment = 0.0025;
    trafo.tap.phase_increment = std::numbers::pi / 180.0;
    trafo.label = "2-3";
    net.ports.push_back(trafo);
    return net;
}

inline const std::vector<TapSetting> kThreeBusTaps{{0, 0}, {2, 1}};

inline BusTargets three_bus_targets()
{
    BusTargets t;
    t.p.resize(3);
    t.q.resize(3);
    t.v_set.resize(3);
    t.p << 0.0, -0.4, -0.25;
    t.q << 0.0, -0.1, -0.05;
    t.v_set << 1.02, 1.0, 1.0;
    return t;
}

}  // namespace scopf::testing
