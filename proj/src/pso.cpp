#include "scopf/pso.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace scopf {

void PsoHyperparameters::validate() const
{
    if (n_particles < 1 || t_max < 1 || lambda < 1)
        throw std::invalid_argument("swarm size, iteration budget, and run count must be >= 1");
    if (!(c1 + c2 >= 4.0))
        throw std::invalid_argument("constriction requires c1 + c2 >= 4");
    if (!(w_start >= w_end) || !(w_end > 0.0))
        throw std::invalid_argument("inertia schedule requires w_start >= w_end > 0");
    for (double z : {z_active_redispatch, z_reactive_redispatch, z_in_phase, z_quadrature,
                     z_voltage})
        if (!(z > 0.0) || z > 1.0)
            throw std::invalid_argument("speed coefficients must lie in (0, 1]");
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
        throw std::invalid_argument("mutation rate must lie in [0, 1]");
}

Eigen::VectorXd PsoProblem::velocity_limits() const
{
    return speed_coefficient.cwiseProduct(upper - lower);
}

void PsoProblem::validate() const
{
    const int m = dimension();
    if (m < 1) throw std::invalid_argument("problem has no dimensions");
    if (upper.size() != m || speed_coefficient.size() != m ||
        static_cast<int>(integer_dims.size()) != m)
        throw std::invalid_argument("problem vectors must share one dimension");
    for (int d = 0; d < m; ++d) {
        if (!(lower[d] <= upper[d]))
            throw std::invalid_argument("inverted bounds in dimension " + std::to_string(d));
        if (!(speed_coefficient[d] > 0.0) || speed_coefficient[d] > 1.0)
            throw std::invalid_argument("speed coefficient out of (0, 1] in dimension " +
                                        std::to_string(d));
    }
    if (!fitness) throw std::invalid_argument("problem has no fitness callback");
}

double constriction(double c1, double c2)
{
    const double psi = c1 + c2;
    if (!(psi >= 4.0)) throw std::invalid_argument("constriction requires c1 + c2 >= 4");
    return 2.0 / std::abs(2.0 - psi - std::sqrt(psi * psi - 4.0 * psi));
}

double inertia(int t, const PsoHyperparameters& hyper)
{
    return hyper.w_start -
           static_cast<double>(t) * (hyper.w_start - hyper.w_end) / hyper.t_max;
}

Eigen::VectorXd round_integers(const Eigen::VectorXd& x, const std::vector<char>& integer_dims)
{
    Eigen::VectorXd rounded = x;
    for (int d = 0; d < x.size(); ++d)
        if (integer_dims[static_cast<std::size_t>(d)])
            rounded[d] = std::floor(std::ceil(2.0 * x[d]) / 2.0);
    return rounded;
}

void set_to_limit(Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                  const Eigen::VectorXd& upper)
{
    x = x.cwiseMax(lower).cwiseMin(upper);
}

void limit_velocity(Eigen::VectorXd& v, const Eigen::VectorXd& v_max, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int d = 0; d < v.size(); ++d) {
        if (std::abs(v[d]) <= v_max[d]) continue;
        const double r3 = unit(rng);
        v[d] = (v[d] > 0.0 ? 1.0 : -1.0) * r3 * v_max[d];
    }
}

void reflect_at_bounds(const Eigen::VectorXd& x, Eigen::VectorXd& v,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper)
{
    for (int d = 0; d < x.size(); ++d)
        if ((x[d] <= lower[d] && v[d] < 0.0) || (x[d] >= upper[d] && v[d] > 0.0)) v[d] = -v[d];
}

Eigen::VectorXd velocity_update(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& p_best, const Eigen::VectorXd& p_gb,
                                double w, const PsoHyperparameters& hyper,
                                std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!hyper.per_dimension_r) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        return w * v + hyper.c1 * r1 * (p_best - x) + hyper.c2 * r2 * (p_gb - x);
    }
    Eigen::VectorXd next(v.size());
    for (int d = 0; d < v.size(); ++d) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        next[d] = w * v[d] + hyper.c1 * r1 * (p_best[d] - x[d]) +
                  hyper.c2 * r2 * (p_gb[d] - x[d]);
    }
    return next;
}

void mutate(Eigen::VectorXd& x, const Eigen::VectorXd& v_max, const Eigen::VectorXd& lower,
            const Eigen::VectorXd& upper, const PsoHyperparameters& hyper,
            std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> pick(0, static_cast<int>(x.size()) - 1);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const int r4 = pick(rng);
    const double r5 = sym(rng);
    const double value = r5 * v_max[r4];
    x[r4] = hyper.additive_mutation ? x[r4] + value : value;
    x[r4] = std::clamp(x[r4], lower[r4], upper[r4]);
}

Swarm initialize(const PsoProblem& problem, const PsoHyperparameters& hyper,
                 std::mt19937_64& rng)
{
    const int m = problem.dimension();
    const int n = hyper.n_particles;
    const Eigen::VectorXd v_max = problem.velocity_limits();

    Swarm swarm;
    swarm.x.resize(m, n);
    swarm.v.resize(m, n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < m; ++d) {
            const double range = problem.upper[d] - problem.lower[d];
            swarm.x(d, i) = range > 0.0 ? problem.lower[d] + unit(rng) * range
                                        : problem.lower[d];
            swarm.v(d, i) = v_max[d] > 0.0 ? sym(rng) * v_max[d] : 0.0;
        }
    }
    swarm.p_best = swarm.x;
    swarm.f_best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    swarm.p_gb = swarm.x.col(0);
    swarm.f_gb = std::numeric_limits<double>::infinity();
    swarm.gb_index = -1;
    return swarm;
}

RunResult run(const PsoProblem& problem, const PsoHyperparameters& hyper,
              std::uint64_t run_index)
{
    problem.validate();
    hyper.validate();

    const auto start_time = std::chrono::steady_clock::now();
    const std::uint64_t seed = hyper.seed + run_index;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n = hyper.n_particles;
    const Eigen::VectorXd v_max = problem.velocity_limits();
    const double k = constriction(hyper.c1, hyper.c2);

    Swarm swarm = initialize(problem, hyper, rng);
    RunResult result;
    result.seed = seed;
    result.trace.reserve(static_cast<std::size_t>(hyper.t_max));

    for (int t = 0; t < hyper.t_max; ++t) {
        // Evaluate on integer-rounded copies; continuous positions stay.
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd probe =
                round_integers(swarm.x.col(i), problem.integer_dims);
            const double f = problem.fitness(probe);
            if (f < swarm.f_best[i]) {
                swarm.f_best[i] = f;
                swarm.p_best.col(i) = swarm.x.col(i);
            }
            if (f < swarm.f_gb) {
                swarm.f_gb = f;
                swarm.p_gb = swarm.x.col(i);
                swarm.gb_index = i;
            }
        }
        result.trace.push_back(swarm.f_gb);

        const double w = inertia(t, hyper);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd v_next = velocity_update(swarm.x.col(i), swarm.v.col(i),
                                                     swarm.p_best.col(i), swarm.p_gb, w,
                                                     hyper, rng);
            limit_velocity(v_next, v_max, rng);
            Eigen::VectorXd x_next = swarm.x.col(i) + k * v_next;
            set_to_limit(x_next, problem.lower, problem.upper);
            reflect_at_bounds(x_next, v_next, problem.lower, problem.upper);
            if (i != swarm.gb_index &&
                (hyper.mutation_rate >= 1.0 ||
                 (hyper.mutation_rate > 0.0 && unit(rng) < hyper.mutation_rate)))
                mutate(x_next, v_max, problem.lower, problem.upper, hyper, rng);
            swarm.x.col(i) = x_next;
            swarm.v.col(i) = v_next;
        }
    }

    result.best_position = round_integers(swarm.p_gb, problem.integer_dims);
    result.best_fitness = swarm.f_gb;
    result.iterations = hyper.t_max;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return result;
}

MultiRunResult run_parallel(const PsoProblem& problem, const PsoHyperparameters& hyper)
{
    problem.validate();
    hyper.validate();

    MultiRunResult multi;
    multi.runs.resize(static_cast<std::size_t>(hyper.lambda));

    unsigned workers = hyper.threads > 0 ? static_cast<unsigned>(hyper.threads)
                                         : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>(workers, static_cast<unsigned>(hyper.lambda));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= hyper.lambda) break;
            multi.runs[static_cast<std::size_t>(i)] =
                run(problem, hyper, static_cast<std::uint64_t>(i));
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    double sum = 0.0;
    multi.best = std::numeric_limits<double>::infinity();
    multi.worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < multi.runs.size(); ++i) {
        const double f = multi.runs[i].best_fitness;
        sum += f;
        if (f < multi.best) {
            multi.best = f;
            multi.best_run = static_cast<int>(i);
        }
        multi.worst = std::max(multi.worst, f);
    }
    multi.average = sum / static_cast<double>(hyper.lambda);
    return multi;
}

}  // namespace scopf
