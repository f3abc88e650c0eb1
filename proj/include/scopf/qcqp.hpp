#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scopf/network.hpp"
#include "scopf/power_flow.hpp"

namespace scopf {

/// Residual blocks of the degree-two reformulation of the tapped power-flow
/// equations, in stacking order. Per-terminal blocks come first (twelve of
/// length 2 * ports), then three nodal blocks, then the scalar loss row.
enum class QcqpBlock : int {
    TapSplit = 0,       // tau_r^2 + tau_i^2 - tau^2
    TapMagnitude,       // tau * (1 + n * dv) - 1
    Tangent,            // tau_i - tau_r * (t|v + dt/dm|v * (m - m|v))
    PhaseStepAnchor,    // m - m|v            (bookkeeping identity row)
    VoltageStepAnchor,  // n - n|v            (bookkeeping identity row)
    AuxVoltageRe,       // Re(tau * u_term) - u_aux_r
    AuxVoltageIm,       // Im(tau * u_term) - u_aux_i
    AuxCurrentRe,       // Re(Y_rated * u_aux) - i_aux_r
    AuxCurrentIm,       // Im(Y_rated * u_aux) - i_aux_i
    CurrentBackRe,      // Re(conj(tau) * i_aux) - i_r
    CurrentBackIm,      // Im(conj(tau) * i_aux) - i_i
    CurrentSplit,       // i_r^2 + i_i^2 - i_mag^2
    ActiveBalance,      // pf * Re(u . conj(sum of terminal + shunt currents)) - p0
    ReactiveBalance,    // pf * Im(u . conj(sum of terminal + shunt currents)) - q0
    VoltageSplit,       // u_r^2 + u_i^2 - u_mag^2
    Loss,               // pf * sum_t Re(u_term * conj(i_t)) - p_loss
};

inline constexpr int kQcqpBlockCount = 16;

/// Stable name of a block, for reports and test diagnostics.
const char* block_name(QcqpBlock block);

/// First row of a block inside the stacked residual, and its length, for a
/// system with the given terminal and node counts.
int block_offset(QcqpBlock block, int terminals, int nodes);
int block_size(QcqpBlock block, int terminals, int nodes);

/// Total residual length: 12 * terminals + 3 * nodes + 1.
int residual_size(int terminals, int nodes);

/// Real-valued state vector of the reformulated system. All per-terminal
/// vectors have length 2 * ports (from side at even indices); from-side
/// entries carry the neutral tap (tau = 1, m = n = 0) since the changer
/// acts at the to side only. The tap variables m and n are real-valued
/// here: integrality is the optimizer's concern, not the model's.
struct QcqpState {
    Eigen::VectorXd tau_r, tau_i, tau;  // relative tap, parts and magnitude
    Eigen::VectorXd m, n;               // quadrature / in-phase tap variables
    Eigen::VectorXd u_aux_r, u_aux_i;   // tap-transformed terminal voltages
    Eigen::VectorXd i_aux_r, i_aux_i;   // currents at the rated admittance
    Eigen::VectorXd i_r, i_i, i_mag;    // back-transformed terminal currents
    Eigen::VectorXd u_r, u_i, u_mag;    // nodal voltages
    double p_loss = 0.0;                // active losses, p.u.
    double power_factor = 1.0;          // scale of the power products

    int terminal_count() const { return static_cast<int>(tau_r.size()); }
    int node_count() const { return static_cast<int>(u_r.size()); }
};

/// Tangent linearization data at one sequential step: the expansion taps,
/// tan(m * dphi) there, and its derivative dphi / cos^2(m * dphi). The
/// in-phase anchor n rides along so the identity rows have a target.
struct LinearizationPoint {
    Eigen::VectorXd m;
    Eigen::VectorXd t;
    Eigen::VectorXd dt_dm;
    Eigen::VectorXd n;
};

/// Single-terminal linearization of tan(m * dphi) at the given tap.
/// Throws std::domain_error when |m * dphi| reaches 90 degrees.
LinearizationPoint tangent_linearize(double m, const TapSpec& spec);

/// Per-terminal linearization point for a whole network at integer taps
/// (empty settings = all neutral). From-side terminals are neutral.
LinearizationPoint linearize_terminals(const Network& net,
                                       std::span<const TapSetting> settings);

/// Stacked residual of the sixteen block rows against their targets:
/// zeros for the structural rows, ones for the tap-magnitude row, the
/// linearization anchors for the tap identity rows, and p0 / q0 for the
/// nodal balances (redispatch deviations enter through p0, q0). Bus shunt
/// currents extend the balance rows; the loss row stays terminal-only to
/// match the network loss definition. Throws std::invalid_argument on any
/// dimension mismatch.
Eigen::VectorXd residual(const QcqpState& state, const Network& net,
                         const Eigen::VectorXd& p0, const Eigen::VectorXd& q0,
                         const LinearizationPoint& lin);

/// Maps a converged power-flow solution at integer taps into the
/// reformulated state: solver voltages, currents, and losses verbatim;
/// tap parts and auxiliary chains constructed from the tap algebra.
/// Throws std::invalid_argument on an unconverged state.
QcqpState from_power_flow(const PowerFlowState& state, const Network& net,
                          std::span<const TapSetting> settings);

/// Worst violation of one checked block: value and offending local index.
struct BlockCheck {
    std::string block;
    double max_abs = 0.0;
    int index = -1;
};

/// Cross-validation report: per-block residual extrema, the degree-four
/// tap-magnitude identity, and the algebraic-equivalence defect between
/// that identity and its degree-two split.
struct QcqpReport {
    std::vector<BlockCheck> blocks;  // the sixteen residual blocks
    BlockCheck quartic_identity;     // (tau_r^2 + tau_i^2)(1 + n dv)^2 - 1
    BlockCheck split_equivalence;    // quartic minus its degree-two composition
    double residual_max = 0.0;       // infinity norm over all sixteen blocks
    double worst = 0.0;              // max over everything checked

    bool pass(double threshold = 1e-8) const { return worst <= threshold; }
};

/// Full cross-check of a converged power-flow solution against the
/// reformulated system. Throws std::invalid_argument on unconverged input.
QcqpReport verify_solution(const PowerFlowState& state,
                           std::span<const TapSetting> settings, const Network& net);

}  // namespace scopf
