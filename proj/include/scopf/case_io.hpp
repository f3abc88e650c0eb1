#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scopf/problem.hpp"
#include "scopf/qcqp.hpp"

namespace scopf {

/// Integer tap-changer description of one transformer branch; increments
/// default to 0.25 % per in-phase step and one degree per quadrature step,
/// ten steps each way.
struct CaseTap {
    int voltage_step_min = -10;
    int voltage_step_max = 10;
    int phase_step_min = -10;
    int phase_step_max = 10;
    double voltage_increment = 0.0025;   // fraction per step
    double phase_increment_deg = 1.0;    // degrees per step

    bool operator==(const CaseTap&) const = default;
};

/// One bus row. Types follow the interchange convention:
/// 1 = load (PQ), 2 = generation (PV), 3 = slack.
struct CaseBus {
    int id = 0;
    int type = 1;
    double p_load_mw = 0.0;
    double q_load_mvar = 0.0;
    double gs_mw = 0.0;        // shunt conductance, MW at 1 p.u. voltage
    double bs_mvar = 0.0;      // shunt susceptance, Mvar at 1 p.u. voltage
    double v_rated_kv = 0.0;
    double v_min = 0.9;
    double v_max = 1.1;

    bool operator==(const CaseBus&) const = default;
};

/// One branch row with per-unit series/charging parameters. The complex
/// rated ratio of a transformer sits at the `to` side and combines the
/// off-nominal magnitude, an explicit shift, and the 30-degrees-per-unit
/// vector group code: ratio * exp(j * (angle_deg + 30 * k)).
struct CaseBranch {
    int from = 0;
    int to = 0;
    double r = 0.0;            // series resistance, p.u.
    double x = 0.0;            // series reactance, p.u.
    double b = 0.0;            // total charging susceptance, p.u.
    double rate_mva = 0.0;     // 0 = unlimited
    bool transformer = false;
    double ratio = 1.0;        // rated magnitude, to-side convention
    double angle_deg = 0.0;
    int vector_group_k = 0;
    std::optional<CaseTap> tap;  // present exactly on transformers

    bool operator==(const CaseBranch&) const = default;
};

/// One plant: market schedule, redispatch headroom, voltage setpoint,
/// and the redispatch price used in the objective.
struct CaseGenerator {
    int bus = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;
    double p_min_mw = 0.0;
    double p_max_mw = 0.0;
    double q_min_mvar = 0.0;
    double q_max_mvar = 0.0;
    double v_set = 1.0;
    double cost = 0.0;         // objective weight per MW of redispatch
    std::string label;

    bool operator==(const CaseGenerator&) const = default;
};

/// Parsed and validated grid case. The two tap-enable flags carry the
/// study scenario: 1 = no tap control, 2 = in-phase only, 3 = both.
struct CaseDocument {
    std::string name = "case";
    double base_mva = 100.0;
    bool enable_in_phase_taps = true;
    bool enable_quadrature_taps = true;
    double c_loss = 1.0;       // objective weight per MW of losses
    std::vector<CaseBus> buses;
    std::vector<CaseBranch> branches;
    std::vector<CaseGenerator> generators;

    bool operator==(const CaseDocument&) const = default;
};

/// Parse or validation failure. Syntax errors carry a line/column pair;
/// semantic errors carry the offending entity instead.
class CaseError : public std::runtime_error {
public:
    CaseError(const std::string& message, int line = -1, int column = -1,
              std::string entity = {})
        : std::runtime_error(message), line_(line), column_(column),
          entity_(std::move(entity))
    {
    }

    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& entity() const { return entity_; }

private:
    int line_;
    int column_;
    std::string entity_;
};

/// Parses a case from text, auto-detecting the native JSON format or the
/// MATPOWER-style `mpc` text subset (read-only). The returned document is
/// semantically validated with all limit defaults filled in.
CaseDocument parse_case(const std::string& text);

/// Reads and parses a case file; unreadable paths raise CaseError naming
/// the path.
CaseDocument parse_case_file(const std::string& path);

/// Canonical JSON rendering of a document: every field explicit, keys
/// sorted. parse_case(write_case(doc)) == doc.
std::string write_case(const CaseDocument& doc);

/// Applies a study scenario to the tap-enable flags (1, 2, or 3).
/// Throws CaseError on any other id.
void apply_scenario(CaseDocument& doc, int scenario);

/// Conversion result: the physical model plus the optimization config.
struct CaseModel {
    Network network;
    ScopfConfig config;
};

/// Builds the network (pi-to-T conversion, per-unit normalization, tap
/// gating per the scenario flags) and the problem configuration.
/// Throws CaseError on non-convertible branches (zero series impedance).
CaseModel to_network(const CaseDocument& doc);

/// Stable lowercase name of a control class, used in CSV exports.
const char* control_class_name(ControlClass cls);

/// Files written by export_results.
struct ExportPaths {
    std::vector<std::string> traces;   // one per-iteration trace CSV per run
    std::string voltages;              // nodal profile, base vs. best
    std::string utilization;           // control values by class
    std::string controls;              // best control vector, JSON
    std::string summary;               // aggregate statistics, JSON
};

/// Writes the campaign outputs under out_dir (created if needed): one
/// global-best trace CSV per run, the voltage profile of the best solution
/// against the base case, control utilization by class, the best control
/// vector, and a summary JSON echoing the hyperparameters.
ExportPaths export_results(const MultiRunResult& result, const ScopfProblem& problem,
                           const PsoHyperparameters& hyper, const CaseDocument& doc,
                           const std::string& out_dir);

/// JSON rendering of a reformulation cross-check report.
std::string to_json(const QcqpReport& report);

}  // namespace scopf
