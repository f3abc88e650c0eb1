#include <chrono>
#include <cmath>

#include "doctest.h"
#include "scopf/pso.hpp"

using namespace scopf;

namespace {

PsoProblem quadratic_1d(double center = 3.0)
{
    PsoProblem p;
    p.lower = Eigen::VectorXd::Constant(1, -10.0);
    p.upper = Eigen::VectorXd::Constant(1, 10.0);
    p.speed_coefficient = Eigen::VectorXd::Constant(1, 0.2);
    p.integer_dims = {0};
    p.fitness = [center](const Eigen::VectorXd& x) {
        return (x[0] - center) * (x[0] - center);
    };
    return p;
}

}  // namespace

TEST_CASE("constriction factor hand values")
{
    CHECK(constriction(2.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(constriction(2.05, 2.05) == doctest::Approx(0.7298).epsilon(1e-3));
    CHECK_THROWS_AS(constriction(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("inertia schedule endpoints and midpoint")
{
    PsoHyperparameters hyper;
    CHECK(inertia(0, hyper) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(inertia(hyper.t_max, hyper) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(inertia(hyper.t_max / 2, hyper) == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("integer rounding table and copy semantics")
{
    Eigen::VectorXd x(6);
    x << 0.0, 0.75, 0.5, -0.5, 1.2, 1.6;
    const std::vector<char> all_int(6, 1);
    const Eigen::VectorXd r = round_integers(x, all_int);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 1.0);
    CHECK(r[2] == 0.0);
    CHECK(r[3] == -1.0);
    CHECK(r[4] == 1.0);
    CHECK(r[5] == 2.0);
    CHECK(x[1] == 0.75);  // source untouched

    // Continuous dimensions pass through unchanged.
    const std::vector<char> none(6, 0);
    CHECK((round_integers(x, none) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("set-to-limit clamps componentwise")
{
    Eigen::VectorXd x(3), lo(3), hi(3);
    x << -15.0, 0.5, 12.0;
    lo << -10.0, 0.0, -10.0;
    hi << 10.0, 1.0, 10.0;
    set_to_limit(x, lo, hi);
    CHECK(x[0] == -10.0);
    CHECK(x[1] == 0.5);
    CHECK(x[2] == 10.0);
}

TEST_CASE("velocity limiting redraws violating components")
{
    std::mt19937_64 rng(42);
    Eigen::VectorXd v_max(2);
    v_max << 4.0, 4.0;

    Eigen::VectorXd v(2);
    v << 1.0, -2.0;
    Eigen::VectorXd untouched = v;
    limit_velocity(v, v_max, rng);
    CHECK((v - untouched).cwiseAbs().maxCoeff() == 0.0);

    v << 40.0, -40.0;
    limit_velocity(v, v_max, rng);
    CHECK(v[0] >= 0.0);
    CHECK(v[0] <= 4.0);
    CHECK(v[1] <= 0.0);
    CHECK(v[1] >= -4.0);

    // The speed cap is z * range: [-10, 10] at z = 1/5 gives 4.
    PsoProblem p = quadratic_1d();
    CHECK(p.velocity_limits()[0] == doctest::Approx(4.0));
}

TEST_CASE("reflection flips outward velocity at active bounds")
{
    Eigen::VectorXd lo(1), hi(1), x(1), v(1);
    lo << -10.0;
    hi << 10.0;

    x << 0.0;
    v << 3.0;
    reflect_at_bounds(x, v, lo, hi);
    CHECK(v[0] == 3.0);  // interior: unchanged

    x << 10.0;
    v << 3.0;
    reflect_at_bounds(x, v, lo, hi);
    CHECK(v[0] == -3.0);  // at max moving out: negated

    x << -10.0;
    v << 3.0;
    reflect_at_bounds(x, v, lo, hi);
    CHECK(v[0] == 3.0);  // at min moving in: unchanged

    x << -10.0;
    v << -3.0;
    reflect_at_bounds(x, v, lo, hi);
    CHECK(v[0] == 3.0);  // at min moving out: negated
}

TEST_CASE("velocity update structure")
{
    PsoHyperparameters hyper;
    std::mt19937_64 rng(7);

    Eigen::VectorXd x(2), v(2);
    x << 1.0, -2.0;
    v << 0.5, 0.25;

    SUBCASE("zero attraction when x equals both bests")
    {
        const Eigen::VectorXd next = velocity_update(x, v, x, x, 0.7, hyper, rng);
        CHECK((next - 0.7 * v).cwiseAbs().maxCoeff() <= 1e-15);
    }

    SUBCASE("scalar draws couple all dimensions")
    {
        // With w = 0 and p_best = p_gb = x + d, v' = (c1 r1 + c2 r2) d, so the
        // per-dimension ratio v'_j / d_j is one shared scalar.
        PsoHyperparameters h = hyper;
        Eigen::VectorXd d(2);
        d << 1.0, -3.0;
        const Eigen::VectorXd next = velocity_update(x, v, x + d, x + d, 0.0, h, rng);
        CHECK(next[0] / d[0] == doctest::Approx(next[1] / d[1]).epsilon(1e-12));
    }

    SUBCASE("attraction mean matches c/2 over many draws")
    {
        Eigen::VectorXd d(2);
        d << 2.0, -1.0;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
        const int draws = 20000;
        for (int s = 0; s < draws; ++s)
            sum += velocity_update(x, Eigen::VectorXd::Zero(2), x + d, x + d, 0.0, hyper, rng);
        const Eigen::VectorXd mean = sum / draws;
        // E[v'] = (c1 + c2) * E[r] * d = 2 d for c1 = c2 = 2.
        CHECK(mean[0] == doctest::Approx(2.0 * d[0]).epsilon(0.03));
        CHECK(mean[1] == doctest::Approx(2.0 * d[1]).epsilon(0.03));
    }

    SUBCASE("per-dimension mode decouples the ratios")
    {
        PsoHyperparameters h = hyper;
        h.per_dimension_r = true;
        Eigen::VectorXd d(2);
        d << 1.0, -3.0;
        bool decoupled = false;
        for (int s = 0; s < 32 && !decoupled; ++s) {
            const Eigen::VectorXd next = velocity_update(x, Eigen::VectorXd::Zero(2), x + d,
                                                         x + d, 0.0, h, rng);
            decoupled = std::abs(next[0] / d[0] - next[1] / d[1]) > 1e-6;
        }
        CHECK(decoupled);
    }
}

TEST_CASE("mutation rewrites one entry within the speed scale")
{
    PsoHyperparameters hyper;
    std::mt19937_64 rng(11);

    Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, -10.0);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(4, 10.0);
    Eigen::VectorXd v_max = Eigen::VectorXd::Constant(4, 4.0);

    for (int s = 0; s < 200; ++s) {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 7.0);
        mutate(x, v_max, lo, hi, hyper, rng);
        int changed = 0;
        for (int d = 0; d < 4; ++d) {
            if (x[d] != 7.0) {
                ++changed;
                CHECK(std::abs(x[d]) <= 4.0);  // r5 in [-1, 1] times v_max
            }
        }
        CHECK(changed <= 1);  // exactly one target (it may land on 7.0 itself)
    }

    // Positive-only bounds: the overwritten value clamps up to the minimum.
    Eigen::VectorXd plo = Eigen::VectorXd::Constant(1, 5.0);
    Eigen::VectorXd phi = Eigen::VectorXd::Constant(1, 10.0);
    Eigen::VectorXd pvmax = Eigen::VectorXd::Constant(1, 1.0);  // z/5 of range 5
    for (int s = 0; s < 50; ++s) {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 8.0);
        mutate(x, pvmax, plo, phi, hyper, rng);
        CHECK(x[0] == doctest::Approx(5.0));  // |r5 * 1| <= 1 always clamps to 5
    }
}

TEST_CASE("initialization respects bounds and speed limits")
{
    PsoProblem p;
    p.lower = Eigen::VectorXd(3);
    p.upper = Eigen::VectorXd(3);
    p.lower << -10.0, 0.0, 2.0;
    p.upper << 10.0, 1.0, 2.0;  // third dimension degenerate
    p.speed_coefficient = Eigen::VectorXd::Constant(3, 0.1);
    p.integer_dims = {0, 0, 0};
    p.fitness = [](const Eigen::VectorXd&) { return 0.0; };

    PsoHyperparameters hyper;
    hyper.n_particles = 64;

    std::mt19937_64 rng(5);
    const Swarm swarm = initialize(p, hyper, rng);
    const Eigen::VectorXd v_max = p.velocity_limits();
    for (int i = 0; i < hyper.n_particles; ++i) {
        for (int d = 0; d < 3; ++d) {
            CHECK(swarm.x(d, i) >= p.lower[d]);
            CHECK(swarm.x(d, i) <= p.upper[d]);
            CHECK(std::abs(swarm.v(d, i)) <= v_max[d] + 1e-15);
        }
        CHECK(swarm.x(2, i) == 2.0);
        CHECK(swarm.v(2, i) == 0.0);
    }

    // Same seed, same swarm.
    std::mt19937_64 rng_a(9), rng_b(9);
    const Swarm a = initialize(p, hyper, rng_a);
    const Swarm b = initialize(p, hyper, rng_b);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-dimensional quadratic is solved within tolerance and budget")
{
    PsoProblem p = quadratic_1d();
    p.integer_dims = {0};  // taps-style dimension: optimum at the lattice point 3
    PsoHyperparameters hyper;
    hyper.seed = 2024;

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult result = run(p, hyper);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CHECK(std::abs(result.best_position[0] - 3.0) < 0.01);
    CHECK(result.best_fitness < 1e-6);
    CHECK(elapsed < 5.0);
    CHECK(result.iterations == hyper.t_max);
    REQUIRE(result.trace.size() == static_cast<std::size_t>(hyper.t_max));
    for (std::size_t t = 1; t < result.trace.size(); ++t)
        CHECK(result.trace[t] <= result.trace[t - 1]);
}

TEST_CASE("continuous quadratic converges to an off-lattice optimum")
{
    PsoProblem p = quadratic_1d(2.718);
    p.integer_dims = {0};
    p.integer_dims[0] = 0;
    PsoHyperparameters hyper;
    hyper.seed = 77;
    const RunResult result = run(p, hyper);
    CHECK(std::abs(result.best_position[0] - 2.718) < 0.01);
}

TEST_CASE("runs are bit-identical under a fixed seed")
{
    const PsoProblem p = quadratic_1d();
    PsoHyperparameters hyper;
    hyper.n_particles = 30;
    hyper.t_max = 60;
    hyper.seed = 314;

    const RunResult a = run(p, hyper);
    const RunResult b = run(p, hyper);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) CHECK(a.trace[t] == b.trace[t]);
    CHECK(a.best_fitness == b.best_fitness);
    CHECK((a.best_position - b.best_position).cwiseAbs().maxCoeff() == 0.0);

    PsoHyperparameters other = hyper;
    other.seed = 315;
    const RunResult c = run(p, other);
    CHECK(c.trace != a.trace);
}

TEST_CASE("evaluated probes stay within bounds and on the integer lattice")
{
    PsoProblem p;
    p.lower = Eigen::VectorXd(2);
    p.upper = Eigen::VectorXd(2);
    p.lower << -10.0, -4.0;
    p.upper << 10.0, 4.0;
    p.speed_coefficient = Eigen::VectorXd::Constant(2, 0.2);
    p.integer_dims = {1, 0};

    bool all_ok = true;
    p.fitness = [&](const Eigen::VectorXd& x) {
        const bool integral = x[0] == std::floor(x[0]);
        const bool bounded = x[0] >= -10.0 && x[0] <= 10.0 && x[1] >= -4.0 && x[1] <= 4.0;
        all_ok = all_ok && integral && bounded;
        return x.squaredNorm();
    };

    PsoHyperparameters hyper;
    hyper.n_particles = 25;
    hyper.t_max = 80;
    hyper.seed = 99;
    const RunResult result = run(p, hyper);
    CHECK(all_ok);
    CHECK(result.best_fitness <= 1e-4);
}

TEST_CASE("degenerate bounds with mutation off keep the swarm stationary")
{
    PsoProblem p;
    p.lower = Eigen::VectorXd::Constant(2, 1.5);
    p.upper = Eigen::VectorXd::Constant(2, 1.5);
    p.speed_coefficient = Eigen::VectorXd::Constant(2, 0.5);
    p.integer_dims = {0, 0};
    p.fitness = [](const Eigen::VectorXd& x) { return x.sum(); };

    PsoHyperparameters hyper;
    hyper.n_particles = 8;
    hyper.t_max = 25;
    hyper.mutation_rate = 0.0;

    const RunResult result = run(p, hyper);
    CHECK(result.best_fitness == doctest::Approx(3.0).epsilon(1e-15));
    for (double f : result.trace) CHECK(f == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(result.best_position[0] == 1.5);
}

TEST_CASE("parallel campaign aggregates independent runs")
{
    const PsoProblem p = quadratic_1d();
    PsoHyperparameters hyper;
    hyper.n_particles = 20;
    hyper.t_max = 50;
    hyper.seed = 500;

    SUBCASE("single run aggregate equals the run")
    {
        hyper.lambda = 1;
        const MultiRunResult multi = run_parallel(p, hyper);
        REQUIRE(multi.runs.size() == 1);
        CHECK(multi.best == multi.runs[0].best_fitness);
        CHECK(multi.average == multi.runs[0].best_fitness);
        CHECK(multi.worst == multi.runs[0].best_fitness);
        CHECK(multi.best_run == 0);
    }

    SUBCASE("reproducible and order-independent across worker counts")
    {
        hyper.lambda = 8;
        hyper.threads = 1;
        const MultiRunResult serial = run_parallel(p, hyper);
        hyper.threads = 4;
        const MultiRunResult pooled = run_parallel(p, hyper);

        REQUIRE(serial.runs.size() == 8);
        REQUIRE(pooled.runs.size() == 8);
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(serial.runs[i].best_fitness == pooled.runs[i].best_fitness);
            CHECK(serial.runs[i].seed == hyper.seed + i);
        }
        CHECK(serial.best == pooled.best);
        CHECK(serial.average == pooled.average);
        CHECK(serial.worst == pooled.worst);

        // Aggregate equals a recomputation over the run list.
        double lo = 1e300, hi = -1e300, sum = 0.0;
        for (const RunResult& r : serial.runs) {
            lo = std::min(lo, r.best_fitness);
            hi = std::max(hi, r.best_fitness);
            sum += r.best_fitness;
        }
        CHECK(serial.best == lo);
        CHECK(serial.worst == hi);
        CHECK(serial.average == doctest::Approx(sum / 8.0).epsilon(1e-15));
    }
}

TEST_CASE("hyperparameter validation")
{
    PsoHyperparameters hyper;
    hyper.c1 = 1.0;
    hyper.c2 = 2.0;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);

    hyper = {};
    hyper.z_voltage = 0.0;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);

    hyper = {};
    hyper.w_end = 0.0;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);

    hyper = {};
    hyper.mutation_rate = 1.5;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);

    hyper = {};
    CHECK_NOTHROW(hyper.validate());
}
