#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scopf/network.hpp"
#include "scopf/power_flow.hpp"
#include "scopf/pso.hpp"

namespace scopf {

/// The five control-variable classes. Each class carries its own speed
/// coefficient in the optimizer.
enum class ControlClass {
    ActiveRedispatch,    // dp per dispatchable resource (MW)
    ReactiveRedispatch,  // dq per resource at a power-controlled bus (Mvar)
    VoltageSetpoint,     // |V| setpoint per slack/voltage-controlled bus (p.u.)
    TapInPhase,          // integer step n per controlled transformer
    TapQuadrature,       // integer step m per controlled transformer
};

/// One dispatchable plant: scheduled operating point and redispatch
/// headroom, in physical MW / Mvar, plus the redispatch cost rate.
struct Resource {
    int bus = -1;           // internal bus index
    double p_sched = 0.0;   // scheduled active output, MW
    double q_sched = 0.0;   // scheduled reactive output, Mvar
    double p_min = 0.0;     // active capability bounds, MW
    double p_max = 0.0;
    double q_min = 0.0;     // reactive capability bounds, Mvar
    double q_max = 0.0;
    double cost = 0.0;      // redispatch cost, monetary units per MW
    std::string label;
};

/// Quadratic penalty weights per constraint class, in objective units per
/// squared per-unit excess.
struct PenaltyWeights {
    double voltage = 1e4;
    double current = 1e4;
    double reactive = 1e3;
};

/// Everything the fitness evaluation needs besides the Network itself.
struct ScopfConfig {
    double c_loss = 1.0;                    // loss cost, monetary units per MW
    bool redispatch_absolute = false;       // cost |dp| instead of signed dp
    PenaltyWeights penalty;
    double power_factor = 1.0;              // 1.0 for p.u. data, 3.0 for physical units
    double feasibility_tol = 1e-6;          // p.u.
    double unconverged_sentinel = 1e12;
    PowerFlowSpec flow;
    std::vector<Resource> resources;
    Eigen::VectorXd load_p;                 // per-bus consumption, p.u. (positive load)
    Eigen::VectorXd load_q;
    Eigen::VectorXd v_set0;                 // per-bus initial magnitude setpoints, p.u.
};

/// One control assignment. Taps are stored per port; uncontrolled ports
/// stay at the neutral setting.
struct ControlVector {
    Eigen::VectorXd dp;                // MW, one per resource
    Eigen::VectorXd dq;                // Mvar, one per resource (used at PQ buses only)
    Eigen::VectorXd v_set;             // p.u., one per slack/voltage-controlled bus
    std::vector<TapSetting> taps;      // one per port
};

/// One optimizer dimension with its bounds and back-references.
struct ControlDim {
    ControlClass cls;
    std::string label;
    double lower = 0.0;
    double upper = 0.0;
    bool integer = false;
    int resource = -1;  // for redispatch classes
    int bus = -1;       // for voltage setpoints
    int port = -1;      // for tap classes
};

/// Maps between the structured ControlVector and the optimizer's flat
/// real vector. Dimension order: active redispatch, reactive redispatch,
/// voltage setpoints, in-phase taps, quadrature taps.
struct ControlLayout {
    std::vector<ControlDim> dims;
    int bus_count = 0;
    int resource_count = 0;
    int port_count = 0;

    int size() const { return static_cast<int>(dims.size()); }
    Eigen::VectorXd lower_bounds() const;
    Eigen::VectorXd upper_bounds() const;
    std::vector<char> integer_mask() const;

    /// Neutral point: no redispatch, initial setpoints, neutral taps.
    ControlVector neutral(const ScopfConfig& cfg) const;

    ControlVector unflatten(const Eigen::VectorXd& x, const ScopfConfig& cfg) const;
    Eigen::VectorXd flatten(const ControlVector& controls) const;

    static ControlLayout build(const Network& net, const ScopfConfig& cfg);
};

/// Constraint evaluation result. Violations are per-unit excesses beyond
/// the respective limits; zero means satisfied.
struct ConstraintReport {
    Eigen::VectorXd voltage_excess;   // per bus
    Eigen::VectorXd current_excess;   // per terminal
    Eigen::VectorXd reactive_excess;  // per bus, generator reactive outcome
    double worst = 0.0;
    bool converged = false;
    bool feasible = false;
};

/// Integer tap quantization used on evaluated copies: floor(ceil(2x)/2).
double quantize_tap(double x);

/// Monetized objective: c_loss * P_loss[MW] + sum of redispatch costs.
/// Throws std::invalid_argument on an unconverged state.
double objective(const PowerFlowState& state, const ControlVector& controls,
                 const ScopfConfig& cfg, const Network& net);

/// Limit checks on a solved state; an unconverged state is reported
/// maximally infeasible.
ConstraintReport check_constraints(const PowerFlowState& state, const ControlVector& controls,
                                   const ScopfConfig& cfg, const Network& net);

/// Penalized fitness: objective + quadratic penalty, or the sentinel for
/// unconverged flows. Total order over all control assignments.
double fitness(const PowerFlowState& state, const ControlVector& controls,
               const ScopfConfig& cfg, const Network& net);

/// Full evaluation product for reporting.
struct Evaluation {
    PowerFlowState state;
    ConstraintReport report;
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    double fitness_value = 0.0;
};

/// Bundles a Network and ScopfConfig into the optimizer-facing evaluator.
/// Solves the base case once and warm-starts every evaluation from it.
class ScopfProblem {
public:
    ScopfProblem(Network net, ScopfConfig cfg);

    const Network& network() const { return net_; }
    const ScopfConfig& config() const { return cfg_; }
    const ControlLayout& layout() const { return layout_; }
    const PowerFlowState& base_state() const { return base_state_; }

    /// Injection and setpoint targets realized by a control assignment.
    BusTargets targets_for(const ControlVector& controls) const;

    PowerFlowState solve(const ControlVector& controls) const;
    Evaluation evaluate_full(const ControlVector& controls) const;

    /// Optimizer hook: flat position to penalized fitness. Tap dimensions
    /// are quantized on the evaluated copy.
    double evaluate(const Eigen::VectorXd& x) const;

private:
    Network net_;
    ScopfConfig cfg_;
    ControlLayout layout_;
    BusTargets base_targets_;
    PowerFlowState base_state_;
};

/// Optimizer-facing view of a ScopfProblem: bounds and integer mask from
/// the control layout, per-dimension speed coefficients from the class
/// coefficients in `hyper`. The returned problem references `problem`,
/// which must outlive it.
PsoProblem make_swarm_problem(const ScopfProblem& problem, const PsoHyperparameters& hyper);

}  // namespace scopf
