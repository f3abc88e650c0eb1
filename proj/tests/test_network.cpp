#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "scopf/network.hpp"
#include "support/random_networks.hpp"

using namespace scopf;

namespace {

Network two_bus_line(Complex series)
{
    // Plain series line as a degenerate T: both series elements 2y, no shunt.
    Network net;
    net.buses.push_back({.id = 1, .kind = BusKind::Slack, .v_rated_kv = 110.0});
    net.buses.push_back({.id = 2, .kind = BusKind::PowerControlled, .v_rated_kv = 110.0});
    TwoPort port;
    port.from_bus = 0;
    port.to_bus = 1;
    port.series_from = 2.0 * series;
    port.series_to = 2.0 * series;
    port.shunt = Complex{0.0, 0.0};
    port.label = "1-2";
    net.ports.push_back(port);
    return net;
}

}  // namespace

TEST_CASE("rated ratio from physical ratings")
{
    const Complex plain = rated_ratio(220.0, 110.0, 0);
    CHECK(plain.real() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(plain.imag() == doctest::Approx(0.0).epsilon(1e-15));

    // Vector group 5 turns the ratio by 150 degrees.
    const Complex turned = rated_ratio(220.0, 110.0, 5);
    CHECK(std::abs(turned) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(std::arg(turned) == doctest::Approx(5.0 * std::numbers::pi / 6.0).epsilon(1e-15));

    CHECK_THROWS_AS(rated_ratio(380.0, 380.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(rated_ratio(110.0, 220.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(rated_ratio(220.0, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(rated_ratio(220.0, 110.0, 12), std::invalid_argument);
    CHECK_THROWS_AS(rated_ratio(220.0, 110.0, -1), std::invalid_argument);
}

TEST_CASE("relative tap ratio")
{
    TapSpec spec;
    spec.voltage_step_min = -10;
    spec.voltage_step_max = 10;
    spec.phase_step_min = -10;
    spec.phase_step_max = 10;
    spec.voltage_increment = 0.0025;
    spec.phase_increment = std::numbers::pi / 180.0;

    CHECK(tap_ratio(spec, {0, 0}) == Complex{1.0, 0.0});

    const Complex inphase = tap_ratio(spec, {4, 0});
    CHECK(inphase.real() == doctest::Approx(1.0 / 1.01).epsilon(1e-15));
    CHECK(inphase.imag() == 0.0);

    const Complex quad = tap_ratio(spec, {0, 3});
    CHECK(std::abs(quad) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::arg(quad) == doctest::Approx(3.0 * std::numbers::pi / 180.0).epsilon(1e-15));

    // Degenerate denominator 1 + n*dv = 0.
    TapSpec wild = spec;
    wild.voltage_increment = 0.1;
    CHECK_THROWS_AS(tap_ratio(wild, {-10, 0}), std::domain_error);
}

TEST_CASE("tap identity: ratio times in-phase divisor recovers pure rotation")
{
    // exp(j*m*dphi) = tau_rel * (1 + n*dv) must hold exactly over the whole
    // integer tap plane.
    TapSpec spec;
    spec.voltage_step_min = -10;
    spec.voltage_step_max = 10;
    spec.phase_step_min = -10;
    spec.phase_step_max = 10;
    spec.voltage_increment = 0.0025;
    spec.phase_increment = std::numbers::pi / 180.0;

    double worst = 0.0;
    for (int n = -10; n <= 10; ++n) {
        for (int m = -10; m <= 10; ++m) {
            const Complex lhs = tap_ratio(spec, {n, m}) * (1.0 + n * spec.voltage_increment);
            const Complex rhs = std::polar(1.0, m * spec.phase_increment);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("terminal admittance of a plain line matches the series reduction")
{
    const Complex y_series = 1.0 / Complex(0.01, 0.1);
    const Network net = two_bus_line(y_series);
    const Eigen::Matrix2cd y = rated_terminal_admittance(net.ports[0]);

    CHECK(std::abs(y(0, 0) - y_series) <= 1e-12);
    CHECK(std::abs(y(0, 1) + y_series) <= 1e-12);
    CHECK(std::abs(y(1, 0) + y_series) <= 1e-12);
    CHECK(std::abs(y(1, 1) - y_series) <= 1e-12);

    // Row sums vanish for a shunt-free line: no current at equal potentials.
    CHECK(std::abs(y(0, 0) + y(0, 1)) <= 1e-12);
    CHECK(std::abs(y(1, 0) + y(1, 1)) <= 1e-12);
}

TEST_CASE("terminal admittance applies the rated complex ratio")
{
    TwoPort port;
    port.from_bus = 0;
    port.to_bus = 1;
    port.is_transformer = true;
    port.series_from = 2.0 / Complex(0.01, 0.08);
    port.series_to = 2.0 / Complex(0.012, 0.09);
    port.shunt = 1.0 / Complex(0.5, 20.0);
    port.vector_group_k = 5;
    port.rated_ratio = rated_ratio(220.0, 110.0, 5);

    const Eigen::Matrix2cd y = rated_terminal_admittance(port);
    const Complex denom = port.series_from + port.series_to + port.shunt;

    // Direct evaluation of the closed-form two-port entries.
    CHECK(std::abs(y(0, 0) - port.series_from * (port.series_to + port.shunt) / denom) <= 1e-12);
    CHECK(std::abs(y(0, 1) + port.rated_ratio * port.series_from * port.series_to / denom) <=
          1e-12);
    CHECK(std::abs(y(1, 0) +
                   std::conj(port.rated_ratio) * port.series_from * port.series_to / denom) <=
          1e-12);
    CHECK(std::abs(y(1, 1) - std::norm(port.rated_ratio) * port.series_to *
                                 (port.series_from + port.shunt) / denom) <= 1e-12);

    // Reciprocity of the off-diagonal pair: both reduce to the same series
    // term once their respective ratio factors are stripped.
    CHECK(std::abs(y(0, 1) * std::conj(port.rated_ratio) - y(1, 0) * port.rated_ratio) <=
          1e-10);
}

TEST_CASE("tap application scales the expected entries only")
{
    TwoPort port;
    port.from_bus = 0;
    port.to_bus = 1;
    port.is_transformer = true;
    port.series_from = 2.0 / Complex(0.01, 0.08);
    port.series_to = 2.0 / Complex(0.012, 0.09);
    port.shunt = 1.0 / Complex(0.5, 20.0);
    port.rated_ratio = rated_ratio(220.0, 110.0, 0);
    port.tap.voltage_step_min = -10;
    port.tap.voltage_step_max = 10;
    port.tap.phase_step_min = -10;
    port.tap.phase_step_max = 10;
    port.tap.voltage_increment = 0.0025;
    port.tap.phase_increment = std::numbers::pi / 180.0;

    const Eigen::Matrix2cd rated = rated_terminal_admittance(port);

    SUBCASE("neutral position is bitwise identical to the rated matrix")
    {
        const Eigen::Matrix2cd y = terminal_admittance(port, {0, 0});
        CHECK(y(0, 0) == rated(0, 0));
        CHECK(y(0, 1) == rated(0, 1));
        CHECK(y(1, 0) == rated(1, 0));
        CHECK(y(1, 1) == rated(1, 1));
    }

    SUBCASE("in-phase step n=4 scales per diag(1, tau) congruence")
    {
        const Eigen::Matrix2cd y = terminal_admittance(port, {4, 0});
        const Complex tau = tap_ratio(port.tap, {4, 0});
        CHECK(y(0, 0) == rated(0, 0));
        CHECK(std::abs(y(0, 1) - rated(0, 1) * tau) <= 1e-14);
        CHECK(std::abs(y(1, 0) - rated(1, 0) * std::conj(tau)) <= 1e-14);
        CHECK(std::abs(y(1, 1) - rated(1, 1) * std::norm(tau)) <= 1e-14);
        // |tau_rel|^2 = 1/1.01^2 for four in-phase steps of 0.25 %.
        CHECK(std::norm(tau) == doctest::Approx(1.0 / (1.01 * 1.01)).epsilon(1e-14));
    }

    SUBCASE("quadrature step keeps diagonal magnitudes")
    {
        const Eigen::Matrix2cd y = terminal_admittance(port, {0, 7});
        CHECK(y(0, 0) == rated(0, 0));
        CHECK(std::abs(std::abs(y(1, 1)) - std::abs(rated(1, 1))) <= 1e-12);
        CHECK(std::abs(std::abs(y(0, 1)) - std::abs(rated(0, 1))) <= 1e-12);
    }
}

TEST_CASE("nodal admittance of the two-bus line")
{
    const Complex y_series = 1.0 / Complex(0.01, 0.1);
    const Network net = two_bus_line(y_series);
    const Eigen::MatrixXcd y = Eigen::MatrixXcd(assemble_nodal_admittance(net, {}));

    REQUIRE(y.rows() == 2);
    CHECK(std::abs(y(0, 0) - y_series) <= 1e-12);
    CHECK(std::abs(y(0, 1) + y_series) <= 1e-12);
    CHECK(std::abs(y(1, 0) + y_series) <= 1e-12);
    CHECK(std::abs(y(1, 1) - y_series) <= 1e-12);
}

TEST_CASE("nodal assembly equals the incidence sandwich")
{
    // The sparse scatter must agree with the dense product
    // I_NT * blockdiag(Y_tt) * I_NT^T entry by entry.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const testing::RandomCase rc = testing::random_case(seed);
        const int n = rc.net.bus_count();
        const int t_count = rc.net.terminal_count();

        Eigen::MatrixXcd y_tt = Eigen::MatrixXcd::Zero(t_count, t_count);
        for (int p = 0; p < rc.net.port_count(); ++p) {
            const Eigen::Matrix2cd block =
                terminal_admittance(rc.net.ports[static_cast<std::size_t>(p)],
                                    rc.settings[static_cast<std::size_t>(p)]);
            y_tt.block(2 * p, 2 * p, 2, 2) = block;
        }
        const Eigen::MatrixXd inc = Eigen::MatrixXd(rc.net.incidence());
        const Eigen::MatrixXcd sandwich =
            inc.cast<Complex>() * y_tt * inc.transpose().cast<Complex>();

        Eigen::MatrixXcd direct =
            Eigen::MatrixXcd(assemble_nodal_admittance(rc.net, rc.settings));
        for (int b = 0; b < n; ++b) {
            const Bus& bus = rc.net.buses[static_cast<std::size_t>(b)];
            direct(b, b) -= Complex(bus.g_shunt, bus.b_shunt);
        }
        CHECK((sandwich - direct).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("bus shunts land on the diagonal")
{
    const Complex y_series = 1.0 / Complex(0.01, 0.1);
    Network net = two_bus_line(y_series);
    net.buses[1].g_shunt = 0.02;
    net.buses[1].b_shunt = 0.15;
    const Eigen::MatrixXcd y = Eigen::MatrixXcd(assemble_nodal_admittance(net, {}));
    CHECK(std::abs(y(1, 1) - (y_series + Complex(0.02, 0.15))) <= 1e-12);
    CHECK(std::abs(y(0, 1) + y_series) <= 1e-12);
}

TEST_CASE("incidence has exactly one unit entry per terminal")
{
    const testing::RandomCase rc = testing::random_case(7);
    const Eigen::MatrixXd inc = Eigen::MatrixXd(rc.net.incidence());
    REQUIRE(inc.cols() == rc.net.terminal_count());
    for (int t = 0; t < inc.cols(); ++t) {
        CHECK(inc.col(t).sum() == doctest::Approx(1.0));
        CHECK(inc.col(t).cwiseAbs().sum() == doctest::Approx(1.0));
        CHECK(inc(rc.net.terminal_bus(t), t) == doctest::Approx(1.0));
    }
}

TEST_CASE("validation rejects malformed models")
{
    const Complex y_series = 1.0 / Complex(0.01, 0.1);

    SUBCASE("well-formed model passes")
    {
        CHECK_NOTHROW(two_bus_line(y_series).validate());
    }
    SUBCASE("no slack")
    {
        Network net = two_bus_line(y_series);
        net.buses[0].kind = BusKind::PowerControlled;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("two slacks")
    {
        Network net = two_bus_line(y_series);
        net.buses[1].kind = BusKind::Slack;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("inverted voltage band")
    {
        Network net = two_bus_line(y_series);
        net.buses[1].v_min = 1.2;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("dangling endpoint")
    {
        Network net = two_bus_line(y_series);
        net.ports[0].to_bus = 5;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("line with a tap spec")
    {
        Network net = two_bus_line(y_series);
        net.ports[0].tap.voltage_step_min = -2;
        net.ports[0].tap.voltage_step_max = 2;
        net.ports[0].tap.voltage_increment = 0.0025;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("tap range not bracketing neutral")
    {
        Network net = two_bus_line(y_series);
        net.ports[0].is_transformer = true;
        net.ports[0].tap.voltage_step_min = 2;
        net.ports[0].tap.voltage_step_max = 6;
        net.ports[0].tap.voltage_increment = 0.0025;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
    SUBCASE("disconnected graph")
    {
        Network net = two_bus_line(y_series);
        net.buses.push_back({.id = 3, .kind = BusKind::PowerControlled, .v_rated_kv = 110.0});
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
        CHECK_THROWS_AS(assemble_nodal_admittance(net, {}), std::invalid_argument);
    }
    SUBCASE("nonpositive current limit")
    {
        Network net = two_bus_line(y_series);
        net.ports[0].i_max = 0.0;
        CHECK_THROWS_AS(net.validate(), std::invalid_argument);
    }
}

TEST_CASE("degenerate T-equivalent is rejected")
{
    TwoPort port;
    port.from_bus = 0;
    port.to_bus = 1;
    port.series_from = Complex{1.0, 0.0};
    port.series_to = Complex{-1.0, 0.0};
    port.shunt = Complex{0.0, 0.0};
    CHECK_THROWS_AS(rated_terminal_admittance(port), std::domain_error);
}
