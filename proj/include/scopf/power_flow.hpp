#pragma once

#include <optional>
#include <span>

#include <Eigen/Core>

#include "scopf/network.hpp"

namespace scopf {

/// Solver settings. `power_factor` is the scale between the complex
/// voltage-current products and the specified injections: 1.0 for
/// per-unit data, 3.0 when the case carries physical three-phase units.
struct PowerFlowSpec {
    double tolerance = 1e-8;      // max |mismatch|, p.u.
    int max_iter = 50;
    double power_factor = 1.0;
    const Eigen::VectorXcd* warm_start = nullptr;  // nullptr = flat start
};

/// Bus-level targets for one solve: net injections (p.u., generation
/// positive) and the magnitude targets used at the slack and
/// voltage-controlled buses.
struct BusTargets {
    Eigen::VectorXd p;        // per bus
    Eigen::VectorXd q;
    Eigen::VectorXd v_set;    // per bus; read only at slack / voltage-controlled
};

/// One solved operating point.
struct PowerFlowState {
    Eigen::VectorXcd v;                   // nodal voltages, p.u.
    Eigen::VectorXcd terminal_current;    // per terminal, p.u.
    Eigen::VectorXd p_inj;                // realized injections, p.u. (power_factor applied)
    Eigen::VectorXd q_inj;
    double p_loss = 0.0;                  // total active losses, p.u. (power_factor applied)
    bool converged = false;
    int iterations = 0;
    double max_mismatch = std::numeric_limits<double>::infinity();
    double power_factor = 1.0;
};

/// Newton-Raphson solve of the nodal power balance for the given tap
/// settings and bus targets. Non-convergence is reported through the
/// returned state, not an exception.
PowerFlowState solve_power_flow(const Network& net, std::span<const TapSetting> settings,
                                const BusTargets& targets, const PowerFlowSpec& spec = {});

/// Per-terminal currents for a voltage profile: the tapped two-port chain
/// (voltage transform, rated admittance, current back-transform).
Eigen::VectorXcd terminal_currents(const Network& net, std::span<const TapSetting> settings,
                                   const Eigen::VectorXcd& v);

/// Total active losses in MW, computed nodally from the state.
/// Throws std::invalid_argument on an unconverged state.
double total_losses(const PowerFlowState& state, const Network& net);

/// Per-port active losses in p.u. (power_factor applied); their sum equals
/// the nodal loss on any consistent state.
Eigen::VectorXd branch_losses(const Network& net, std::span<const TapSetting> settings,
                              const Eigen::VectorXcd& v, double power_factor);

}  // namespace scopf
