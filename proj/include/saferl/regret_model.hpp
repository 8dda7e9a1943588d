#pragma once

#include <limits>

namespace saferl::regret {

/// The seven driver-specific constants of the lane-change decision model.
struct RegretParams {
    double sigma1 = 10.1795;  ///< regret-transform sinh amplitude, >= 0
    double sigma2 = 0.1130;   ///< regret-transform sinh rate, >= 0
    double sigma3 = 0.5108;   ///< regret-transform linear slope, >= 0
    double eta1 = 152.5796;   ///< slow-down cost scale [m^2/s^2], >= 0
    double beta1 = 9.9170;    ///< probability-weight scale, >= 0
    double beta2 = 2.3812;    ///< probability-weight curvature, >= 0
    double tau_s = 3.5193;    ///< safe lane-change duration [s], > 0

    void validate() const;
};

/// What the deciding driver observes: speeds in m/s, gap in meters.
/// v_s: blocking leader, v_c: own current, v_f: approaching vehicle in the
/// target lane, v_b: the driver's best speed, d: gap to the approacher.
class LaneChangeObservation {
public:
    LaneChangeObservation(double v_s, double v_c, double v_f, double v_b, double d);

    double v_s() const { return v_s_; }
    double v_c() const { return v_c_; }
    double v_f() const { return v_f_; }
    double v_b() const { return v_b_; }
    double d() const { return d_; }

    /// A leader slower than this cannot be reasoned about by the model;
    /// car-following logic owns that regime.
    static constexpr double kMinLeaderSpeed = 0.05;

private:
    double v_s_, v_c_, v_f_, v_b_, d_;
};

enum class LaneDecision { ChangeLane, KeepLane };

/// Intermediate quantities behind a decision, for inspection and logging.
struct DecisionTrace {
    double t_c = 0.0;     ///< time-to-collision, +inf when not closing
    double p_hat = 0.0;   ///< estimated success probability in [0,1]
    double u_keep = 0.0;  ///< keep-lane no-collision utility (<= 0 for v_b >= v_s)
    double w_val = 0.0;   ///< weighted probability in [0,1]
    double e_ck = 0.0;    ///< net advantage of changing over keeping
    LaneDecision decision = LaneDecision::KeepLane;
};

constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// q(du) = sigma1*sinh(sigma2*du) + sigma3*du. Odd and nondecreasing.
double regret_transform(double delta_u, const RegretParams& p);

/// w(p) = exp(-beta1*(-log p)^beta2) on [0,1], with w(0) = 0 and w(1) = 1.
double probability_weight(double p_obj, const RegretParams& p);

/// d / (v_f - v_c) when closing, +inf otherwise.
double time_to_collision(double d, double v_f, double v_c);

/// t_c / tau_s clipped to 1; infinite t_c maps to exactly 1.
double estimate_success_probability(double t_c, const RegretParams& p);

/// Keep-lane no-collision utility eta1*(1/v_f^2 - v_b/(v_s*v_f^2)).
double keep_lane_utility(const LaneChangeObservation& obs, const RegretParams& p);

/// e_ck = w(p_hat)*q(-u_keep) + (1 - w(p_hat))*q(-1), with the full trace.
DecisionTrace net_advantage(const LaneChangeObservation& obs, const RegretParams& p);

/// ChangeLane iff e_ck > 0; the tie e_ck = 0 keeps the lane.
LaneDecision decide(const LaneChangeObservation& obs, const RegretParams& p);

} // namespace saferl::regret
