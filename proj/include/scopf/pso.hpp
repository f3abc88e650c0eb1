#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace scopf {

/// Swarm hyperparameters. Defaults reproduce the reference configuration:
/// 200 particles, 500 iterations, c1 = c2 = 2, inertia 0.9 -> 0.4, speed
/// coefficients 1/10 for redispatch classes and 1/5 for taps and voltage
/// setpoints, 100 independent runs.
struct PsoHyperparameters {
    int n_particles = 200;
    int t_max = 500;
    double c1 = 2.0;
    double c2 = 2.0;
    double w_start = 0.9;
    double w_end = 0.4;
    double z_active_redispatch = 0.1;
    double z_reactive_redispatch = 0.1;
    double z_in_phase = 0.2;
    double z_quadrature = 0.2;
    double z_voltage = 0.2;
    int lambda = 100;               // independent runs
    std::uint64_t seed = 1;         // master seed; run i draws from seed + i
    bool per_dimension_r = false;   // draw r1, r2 per dimension instead of per particle
    double mutation_rate = 1.0;     // probability a non-incumbent particle mutates
    bool additive_mutation = false; // perturb instead of overwriting the chosen entry
    int threads = 0;                // 0 = hardware concurrency

    /// Throws std::invalid_argument when the convergence precondition
    /// c1 + c2 >= 4 or any range constraint is violated.
    void validate() const;
};

/// Optimizer-facing problem: box bounds, per-dimension speed coefficients,
/// integer-dimension mask, and a fitness callback (smaller is better).
struct PsoProblem {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd speed_coefficient;  // z per dimension, in (0, 1]
    std::vector<char> integer_dims;     // 1 where evaluation rounds to integer
    std::function<double(const Eigen::VectorXd&)> fitness;

    int dimension() const { return static_cast<int>(lower.size()); }
    Eigen::VectorXd velocity_limits() const;  // z .* (upper - lower)
    void validate() const;
};

/// Swarm state; particles are columns.
struct Swarm {
    Eigen::MatrixXd x;       // positions, dim x n
    Eigen::MatrixXd v;       // velocities, dim x n
    Eigen::MatrixXd p_best;  // personal bests, dim x n
    Eigen::VectorXd f_best;  // personal best fitness
    Eigen::VectorXd p_gb;    // global best position
    double f_gb = std::numeric_limits<double>::infinity();
    int gb_index = -1;       // particle currently holding the global best
};

struct RunResult {
    Eigen::VectorXd best_position;
    double best_fitness = std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // global best after each iteration, non-increasing
    double wall_seconds = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
};

struct MultiRunResult {
    std::vector<RunResult> runs;
    int best_run = -1;
    double best = std::numeric_limits<double>::infinity();
    double average = std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
};

/// Constriction factor 2 / |2 - psi - sqrt(psi^2 - 4 psi)| with
/// psi = c1 + c2 >= 4; equals 1 at c1 = c2 = 2.
double constriction(double c1, double c2);

/// Linearly decreasing inertia w(t) = w_start - t (w_start - w_end) / t_max.
double inertia(int t, const PsoHyperparameters& hyper);

/// Integer rounding floor(ceil(2x)/2) on the masked dimensions; returns a
/// copy, never modifies the continuous position.
Eigen::VectorXd round_integers(const Eigen::VectorXd& x, const std::vector<char>& integer_dims);

/// Componentwise clamp into [lower, upper].
void set_to_limit(Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                  const Eigen::VectorXd& upper);

/// Where |v_j| exceeds v_max_j, redraw v_j = sign(v_j) * r3 * v_max_j with a
/// fresh uniform r3 per violation.
void limit_velocity(Eigen::VectorXd& v, const Eigen::VectorXd& v_max, std::mt19937_64& rng);

/// Negate outward velocity components at active bounds (x already clamped).
void reflect_at_bounds(const Eigen::VectorXd& x, Eigen::VectorXd& v,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// One velocity update: w v + c1 r1 (p_best - x) + c2 r2 (p_gb - x), with
/// r1, r2 scalar per particle (or per dimension when per_dimension_r).
Eigen::VectorXd velocity_update(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& p_best, const Eigen::VectorXd& p_gb,
                                double w, const PsoHyperparameters& hyper,
                                std::mt19937_64& rng);

/// Overwrite (or perturb) one uniformly chosen entry with r5 * v_max, then
/// clamp that entry into bounds.
void mutate(Eigen::VectorXd& x, const Eigen::VectorXd& v_max, const Eigen::VectorXd& lower,
            const Eigen::VectorXd& upper, const PsoHyperparameters& hyper,
            std::mt19937_64& rng);

/// Uniform initialization of positions within bounds and velocities within
/// the per-dimension speed limits.
Swarm initialize(const PsoProblem& problem, const PsoHyperparameters& hyper,
                 std::mt19937_64& rng);

/// One full optimization run; run_index offsets the master seed.
RunResult run(const PsoProblem& problem, const PsoHyperparameters& hyper,
              std::uint64_t run_index = 0);

/// hyper.lambda independent runs with decorrelated seeds, executed on a
/// worker pool; aggregation is order-independent.
MultiRunResult run_parallel(const PsoProblem& problem, const PsoHyperparameters& hyper);

}  // namespace scopf
