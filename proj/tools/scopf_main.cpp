#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scopf/case_io.hpp"
#include "scopf/problem.hpp"
#include "scopf/qcqp.hpp"

namespace {

using namespace scopf;

/// Everything the argument parser produces.
struct CliConfig {
    std::string case_path;
    std::string solution_path;
    std::string out_dir;          // empty: run-stamped directory
    int scenario = 3;
    PsoHyperparameters hyper;     // defaults as published, flag-overridable
    bool verbose = false;
};

std::string run_stamped_dir()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        now.time_since_epoch()) % 1000;
    std::tm tm{};
    localtime_r(&t, &tm);
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "scopf-run-%04d%02d%02d-%02d%02d%02d-%03d",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                  tm.tm_sec, static_cast<int>(ms.count()));
    return buffer;
}

std::string ensure_out_dir(const CliConfig& cli)
{
    const std::string dir = cli.out_dir.empty() ? run_stamped_dir() : cli.out_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

void write_voltage_csv(const std::string& path, const Network& net,
                       const PowerFlowState& state)
{
    std::ofstream out(path, std::ios::binary);
    out << "bus_id,v_pu,angle_deg\n";
    for (int b = 0; b < net.bus_count(); ++b) {
        const Complex v = state.v[b];
        char line[96];
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n",
                      net.buses[static_cast<std::size_t>(b)].id, std::abs(v),
                      std::arg(v) * 180.0 / std::numbers::pi);
        out << line;
    }
    if (!out.good()) throw std::runtime_error("cannot write " + path);
}

int cmd_powerflow(const CliConfig& cli)
{
    const CaseDocument doc = parse_case_file(cli.case_path);
    const CaseModel model = to_network(doc);
    const ScopfProblem problem(model.network, model.config);
    const PowerFlowState& state = problem.base_state();

    std::cout << "case " << doc.name << ": " << model.network.bus_count() << " buses, "
              << model.network.port_count() << " branches, "
              << model.config.resources.size() << " resources\n";
    if (!state.converged) {
        std::cerr << "power flow did not converge after " << state.iterations
                  << " iterations (max mismatch " << state.max_mismatch << " p.u.)\n";
        return 1;
    }
    std::cout << std::fixed << std::setprecision(3);
    std::cout << "converged in " << state.iterations << " iterations, max mismatch "
              << std::scientific << std::setprecision(2) << state.max_mismatch
              << " p.u.\n";
    std::cout << std::fixed << std::setprecision(3) << "P_loss = "
              << state.p_loss * model.network.base_mva << " MW\n";

    const std::string dir = ensure_out_dir(cli);
    const std::string csv = (std::filesystem::path(dir) / "voltages.csv").string();
    write_voltage_csv(csv, model.network, state);
    std::cout << "voltage profile written to " << csv << "\n";
    return 0;
}

int cmd_optimize(const CliConfig& cli)
{
    CaseDocument doc = parse_case_file(cli.case_path);
    apply_scenario(doc, cli.scenario);
    const CaseModel model = to_network(doc);
    const ScopfProblem problem(model.network, model.config);
    if (!problem.base_state().converged) {
        std::cerr << "base-case power flow did not converge; nothing to optimize\n";
        return 1;
    }

    const PsoProblem swarm = make_swarm_problem(problem, cli.hyper);
    if (swarm.dimension() == 0) {
        std::cerr << "case exposes no control variables under scenario " << cli.scenario
                  << "\n";
        return 2;
    }
    std::cout << "case " << doc.name << ", scenario " << cli.scenario << ": "
              << swarm.dimension() << " control variables, " << cli.hyper.lambda
              << " runs of " << cli.hyper.n_particles << " particles x "
              << cli.hyper.t_max << " iterations\n";

    const MultiRunResult result = run_parallel(swarm, cli.hyper);

    int failed_runs = 0;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const RunResult& run = result.runs[i];
        const bool failed = !(run.best_fitness < problem.config().unconverged_sentinel);
        failed_runs += failed;
        if (cli.verbose || failed) {
            std::cout << "  run " << i << " (seed " << run.seed << "): best "
                      << std::setprecision(6) << run.best_fitness << " in "
                      << std::setprecision(1) << std::fixed << run.wall_seconds << " s"
                      << (failed ? "  [no converged evaluation]" : "") << "\n"
                      << std::defaultfloat;
        }
    }
    if (failed_runs > 0)
        std::cerr << failed_runs << " of " << result.runs.size()
                  << " runs never found a converged operating point\n";

    const std::string dir = ensure_out_dir(cli);
    const ExportPaths paths = export_results(result, problem, cli.hyper, doc, dir);

    const ControlVector best_controls =
        problem.layout().unflatten(result.runs[static_cast<std::size_t>(result.best_run)]
                                       .best_position,
                                   problem.config());
    const Evaluation best = problem.evaluate_full(best_controls);

    std::cout << std::fixed << std::setprecision(4);
    std::cout << "fitness best " << result.best << "  average " << result.average
              << "  worst " << result.worst << "\n";
    std::cout << "losses " << problem.base_state().p_loss * model.network.base_mva
              << " MW (base) -> " << best.state.p_loss * model.network.base_mva
              << " MW (best)\n";
    std::cout << "best solution " << (best.report.feasible ? "feasible" : "INFEASIBLE")
              << ", results in " << dir << "\n";

    return (best.state.converged && best.report.feasible) ? 0 : 1;
}

int cmd_validate(const CliConfig& cli)
{
    CaseDocument doc = parse_case_file(cli.case_path);
    apply_scenario(doc, cli.scenario);
    const CaseModel model = to_network(doc);
    const Network& net = model.network;
    const ScopfProblem problem(net, model.config);
    const ControlLayout& layout = problem.layout();

    std::ifstream in(cli.solution_path, std::ios::binary);
    if (!in) throw CaseError("cannot read solution file: " + cli.solution_path);
    nlohmann::json solution;
    try {
        solution = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw CaseError("solution file is not valid JSON: " + std::string(e.what()));
    }
    if (!solution.contains("x") || !solution["x"].is_array())
        throw CaseError("solution file lacks the control vector field 'x'");
    const std::vector<double> x = solution["x"].get<std::vector<double>>();
    if (static_cast<int>(x.size()) != layout.size())
        throw CaseError("solution has " + std::to_string(x.size()) +
                        " controls, the case expects " + std::to_string(layout.size()));

    Eigen::VectorXd xv(layout.size());
    for (int d = 0; d < layout.size(); ++d) xv[d] = x[static_cast<std::size_t>(d)];

    // Audit the raw vector against the declared box and integrality.
    std::vector<std::string> bound_violations;
    for (int d = 0; d < layout.size(); ++d) {
        const ControlDim& dim = layout.dims[static_cast<std::size_t>(d)];
        char msg[160];
        if (xv[d] < dim.lower - 1e-9 || xv[d] > dim.upper + 1e-9) {
            std::snprintf(msg, sizeof msg, "%s %s = %.6g outside [%g, %g]",
                          control_class_name(dim.cls), dim.label.c_str(), xv[d], dim.lower,
                          dim.upper);
            bound_violations.emplace_back(msg);
        } else if (dim.integer && std::abs(xv[d] - std::round(xv[d])) > 1e-9) {
            std::snprintf(msg, sizeof msg, "%s %s = %.6g is not an integer step",
                          control_class_name(dim.cls), dim.label.c_str(), xv[d]);
            bound_violations.emplace_back(msg);
        }
    }
    for (const std::string& v : bound_violations) std::cout << "bounds: " << v << "\n";

    const ControlVector controls = layout.unflatten(xv, problem.config());
    const Evaluation eval = problem.evaluate_full(controls);

    if (!eval.state.converged) {
        std::cerr << "power flow does not converge at the proposed solution\n";
        return 1;
    }

    const double tol = problem.config().feasibility_tol;
    int constraint_count = 0;
    for (int b = 0; b < net.bus_count(); ++b)
        if (eval.report.voltage_excess[b] > tol) {
            ++constraint_count;
            std::cout << "voltage: bus " << net.buses[static_cast<std::size_t>(b)].id
                      << " |v| = " << std::setprecision(4) << std::fixed
                      << std::abs(eval.state.v[b]) << " p.u. exceeds its band by "
                      << eval.report.voltage_excess[b] << "\n"
                      << std::defaultfloat;
        }
    for (int t = 0; t < net.terminal_count(); ++t)
        if (eval.report.current_excess[t] > tol) {
            ++constraint_count;
            std::cout << "current: branch "
                      << net.ports[static_cast<std::size_t>(t / 2)].label << " terminal "
                      << (t % 2 == 0 ? "from" : "to") << " exceeds its rating by "
                      << eval.report.current_excess[t] << " p.u.\n";
        }
    for (int b = 0; b < net.bus_count(); ++b)
        if (eval.report.reactive_excess[b] > tol) {
            ++constraint_count;
            std::cout << "reactive: bus " << net.buses[static_cast<std::size_t>(b)].id
                      << " generation exceeds its capability by "
                      << eval.report.reactive_excess[b] << " p.u.\n";
        }

    const QcqpReport report = verify_solution(eval.state, controls.taps, net);

    const std::string dir = ensure_out_dir(cli);
    const std::string report_path =
        (std::filesystem::path(dir) / "validation_report.json").string();
    {
        nlohmann::json out_json;
        out_json["case"] = doc.name;
        out_json["scenario"] = cli.scenario;
        out_json["objective"] = eval.objective_value;
        out_json["loss_mw"] = eval.state.p_loss * net.base_mva;
        out_json["feasible"] = eval.report.feasible;
        out_json["bound_violations"] = bound_violations;
        out_json["constraint_violations"] = constraint_count;
        out_json["residual"] = nlohmann::json::parse(to_json(report));
        std::ofstream out(report_path, std::ios::binary);
        out << out_json.dump(2) << "\n";
        if (!out.good()) throw std::runtime_error("cannot write " + report_path);
    }

    std::cout << std::setprecision(4) << std::fixed;
    std::cout << "objective " << eval.objective_value << ", losses "
              << eval.state.p_loss * net.base_mva << " MW\n"
              << std::defaultfloat;
    std::cout << "reformulation residual max " << std::scientific << std::setprecision(2)
              << report.worst << (report.pass(1e-8) ? " (pass)" : " (FAIL)") << "\n"
              << std::defaultfloat;
    std::cout << "report written to " << report_path << "\n";

    const bool ok = bound_violations.empty() && eval.report.feasible && report.pass(1e-8);
    std::cout << (ok ? "solution valid" : "solution REJECTED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Security-constrained optimal power flow toolkit"};
    app.require_subcommand(1);
    app.footer("Every flag can also be set through an environment variable with the\n"
               "SCOPF_ prefix (for example SCOPF_CASE, SCOPF_SEED, SCOPF_LAMBDA).");

    CliConfig cli;

    const auto add_case = [&](CLI::App* sub) {
        sub->add_option("--case", cli.case_path, "case file, JSON or mpc text")
            ->required()
            ->envname("SCOPF_CASE");
        sub->add_option("--out", cli.out_dir,
                        "output directory (default: fresh run-stamped directory)")
            ->envname("SCOPF_OUT");
        sub->add_flag("-v,--verbose", cli.verbose, "per-run detail");
    };
    const auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario", cli.scenario,
                        "tap study scenario: 1 locked, 2 in-phase, 3 both (default 3)")
            ->check(CLI::Range(1, 3))
            ->envname("SCOPF_SCENARIO");
    };

    CLI::App* pf = app.add_subcommand("powerflow", "solve the base-case power flow");
    add_case(pf);

    CLI::App* opt = app.add_subcommand("optimize", "run the swarm optimization campaign");
    add_case(opt);
    add_scenario(opt);
    opt->add_option("--seed", cli.hyper.seed, "master seed (run i uses seed + i)")
        ->envname("SCOPF_SEED");
    opt->add_option("--lambda", cli.hyper.lambda, "number of independent runs")
        ->check(CLI::Range(1, 1000000))
        ->envname("SCOPF_LAMBDA");
    opt->add_option("--particles", cli.hyper.n_particles, "swarm size per run")
        ->check(CLI::Range(1, 1000000))
        ->envname("SCOPF_PARTICLES");
    opt->add_option("--iterations", cli.hyper.t_max, "iterations per run")
        ->check(CLI::Range(1, 100000000))
        ->envname("SCOPF_ITERATIONS");
    opt->add_option("--threads", cli.hyper.threads,
                    "worker threads (0 = available parallelism)")
        ->check(CLI::Range(0, 4096))
        ->envname("SCOPF_THREADS");

    CLI::App* val =
        app.add_subcommand("validate", "re-check an exported solution end to end");
    add_case(val);
    add_scenario(val);
    val->add_option("--solution", cli.solution_path,
                    "solution JSON with the control vector 'x'")
        ->required()
        ->envname("SCOPF_SOLUTION");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (pf->parsed()) return cmd_powerflow(cli);
        if (opt->parsed()) return cmd_optimize(cli);
        return cmd_validate(cli);
    } catch (const CaseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
