#pragma once

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace scopf {

using Complex = std::complex<double>;

enum class BusKind { Slack, VoltageControlled, PowerControlled };

/// One network node. Injections are per-unit on the system base,
/// generation positive.
struct Bus {
    int id = 0;                   // external numbering from the case file
    BusKind kind = BusKind::PowerControlled;
    double v_rated_kv = 0.0;
    double p0 = 0.0;              // initial active injection, p.u.
    double q0 = 0.0;              // initial reactive injection, p.u.
    double v_min = 0.9;
    double v_max = 1.1;
    double g_shunt = 0.0;         // bus shunt admittance, p.u.
    double b_shunt = 0.0;
};

/// Integer tap-changer ranges of one transformer. A null spec (all ranges
/// and increments zero) marks an uncontrolled terminal; plain lines always
/// carry the null spec.
struct TapSpec {
    int voltage_step_min = 0;     // in-phase steps
    int voltage_step_max = 0;
    int phase_step_min = 0;       // quadrature steps
    int phase_step_max = 0;
    double voltage_increment = 0.0;   // relative voltage change per step
    double phase_increment = 0.0;     // radians per step

    bool is_null() const
    {
        return voltage_step_min == 0 && voltage_step_max == 0 &&
               phase_step_min == 0 && phase_step_max == 0 &&
               voltage_increment == 0.0 && phase_increment == 0.0;
    }
    bool has_in_phase_range() const { return voltage_step_min < voltage_step_max; }
    bool has_quadrature_range() const { return phase_step_min < phase_step_max; }
};

/// One integer tap position (in-phase step, quadrature step).
struct TapSetting {
    int voltage_step = 0;
    int phase_step = 0;
};

/// Two-port branch in the T-equivalent form: two series admittances around
/// a center shunt, all referred to the from side, plus the complex rated
/// ratio of the ideal transformer at the to side (1 for lines).
struct TwoPort {
    int from_bus = -1;            // internal bus index, higher-voltage side for transformers
    int to_bus = -1;
    Complex series_from;          // admittance of the from-side series element
    Complex series_to;            // admittance of the to-side series element
    Complex shunt;                // admittance of the center shunt element
    Complex rated_ratio = Complex(1.0, 0.0);
    int vector_group_k = 0;
    TapSpec tap;
    double i_max = std::numeric_limits<double>::infinity();  // terminal current limit, p.u.
    bool is_transformer = false;
    std::string label;            // "from-to" in external ids, for reports
};

/// Immutable grid model. Terminal t of port p has index 2*p (from side)
/// or 2*p+1 (to side); the incidence matrix has one +1 entry per terminal
/// column at the attached bus row.
struct Network {
    std::vector<Bus> buses;
    std::vector<TwoPort> ports;
    double base_mva = 100.0;

    int bus_count() const { return static_cast<int>(buses.size()); }
    int port_count() const { return static_cast<int>(ports.size()); }
    int terminal_count() const { return 2 * port_count(); }

    int terminal_bus(int t) const
    {
        const TwoPort& p = ports[static_cast<std::size_t>(t / 2)];
        return (t % 2 == 0) ? p.from_bus : p.to_bus;
    }

    int slack_index() const;                     // -1 when absent
    int bus_index(int external_id) const;        // -1 when unknown
    bool is_connected() const;

    /// Node-terminal incidence, one +1 per terminal column.
    Eigen::SparseMatrix<double> incidence() const;

    /// Throws std::invalid_argument on a malformed model (no or duplicate
    /// slack, dangling port endpoints, bad voltage bounds, disconnection).
    void validate() const;
};

/// Rated complex ratio of a transformer from physical ratings and the
/// vector group code number k (30 degrees of phase per unit of k).
/// Requires v_from_rated > v_to_rated > 0 and k in [0, 11].
Complex rated_ratio(double v_from_rated, double v_to_rated, int vector_group_k);

/// Relative tap ratio exp(j*m*dphi) / (1 + n*dv) for one tap position.
/// Throws when the in-phase denominator vanishes.
Complex tap_ratio(const TapSpec& spec, const TapSetting& setting);

/// 2x2 terminal admittance of the port at its rated ratio (taps neutral).
/// Throws when the T-equivalent denominator is singular.
Eigen::Matrix2cd rated_terminal_admittance(const TwoPort& port);

/// 2x2 terminal admittance with the tap position applied: conj(T) * Yr * T
/// with T = diag(1, tau_rel).
Eigen::Matrix2cd terminal_admittance(const TwoPort& port, const TapSetting& setting);

/// Nodal admittance matrix assembled from the per-port terminal blocks via
/// the incidence map, plus bus shunt admittances on the diagonal.
/// `settings` is indexed per port and may be empty (all taps neutral).
/// Throws when the network is disconnected.
Eigen::SparseMatrix<Complex> assemble_nodal_admittance(const Network& net,
                                                       std::span<const TapSetting> settings);

}  // namespace scopf
