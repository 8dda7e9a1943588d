#include "saferl/regret_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace saferl::regret {

namespace {

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) {
        throw std::domain_error(std::string(name) + " must be finite");
    }
}

} // namespace

void RegretParams::validate() const {
    for (auto [v, n] : {std::pair{sigma1, "sigma1"}, {sigma2, "sigma2"},
                        {sigma3, "sigma3"}, {eta1, "eta1"},
                        {beta1, "beta1"}, {beta2, "beta2"}}) {
        require_finite(v, n);
        if (v < 0.0) throw std::domain_error(std::string(n) + " must be >= 0");
    }
    require_finite(tau_s, "tau_s");
    if (tau_s <= 0.0) throw std::domain_error("tau_s must be > 0");
}

LaneChangeObservation::LaneChangeObservation(double v_s, double v_c, double v_f,
                                             double v_b, double d)
    : v_s_(v_s), v_c_(v_c), v_f_(v_f), v_b_(v_b), d_(d) {
    require_finite(v_s, "v_s");
    require_finite(v_c, "v_c");
    require_finite(v_f, "v_f");
    require_finite(v_b, "v_b");
    require_finite(d, "d");
    if (v_c < 0.0 || v_f < 0.0 || v_b < 0.0) {
        throw std::invalid_argument("speeds must be >= 0");
    }
    if (d < 0.0) throw std::invalid_argument("gap d must be >= 0");
    if (v_s <= kMinLeaderSpeed) {
        throw std::invalid_argument("leader speed v_s too small for the lane-change model");
    }
    if (v_s > v_b) throw std::invalid_argument("v_s must not exceed v_b");
}

double regret_transform(double delta_u, const RegretParams& p) {
    require_finite(delta_u, "delta_u");
    return p.sigma1 * std::sinh(p.sigma2 * delta_u) + p.sigma3 * delta_u;
}

double probability_weight(double p_obj, const RegretParams& p) {
    if (!(p_obj >= 0.0 && p_obj <= 1.0)) {
        throw std::domain_error("probability_weight input must lie in [0,1]");
    }
    if (p_obj == 0.0) return 0.0;
    if (p_obj == 1.0) return 1.0;
    return std::exp(-p.beta1 * std::pow(-std::log(p_obj), p.beta2));
}

double time_to_collision(double d, double v_f, double v_c) {
    if (!(d >= 0.0)) throw std::domain_error("gap d must be >= 0");
    if (v_c >= v_f) return kInfiniteTime;
    return d / (v_f - v_c);
}

double estimate_success_probability(double t_c, const RegretParams& p) {
    if (t_c >= p.tau_s) return 1.0;  // handles the infinite sentinel too
    if (!(t_c >= 0.0)) throw std::domain_error("t_c must be >= 0");
    return t_c / p.tau_s;
}

double keep_lane_utility(const LaneChangeObservation& obs, const RegretParams& p) {
    if (obs.v_f() == 0.0) throw std::domain_error("v_f = 0 is singular for keep_lane_utility");
    const double vf2 = obs.v_f() * obs.v_f();
    return p.eta1 * (1.0 / vf2 - obs.v_b() / (obs.v_s() * vf2));
}

DecisionTrace net_advantage(const LaneChangeObservation& obs, const RegretParams& p) {
    DecisionTrace tr;
    tr.t_c = time_to_collision(obs.d(), obs.v_f(), obs.v_c());
    tr.p_hat = estimate_success_probability(tr.t_c, p);
    tr.u_keep = keep_lane_utility(obs, p);
    tr.w_val = probability_weight(tr.p_hat, p);
    tr.e_ck = tr.w_val * regret_transform(-tr.u_keep, p)
            + (1.0 - tr.w_val) * regret_transform(-1.0, p);
    tr.decision = tr.e_ck > 0.0 ? LaneDecision::ChangeLane : LaneDecision::KeepLane;
    return tr;
}

LaneDecision decide(const LaneChangeObservation& obs, const RegretParams& p) {
    return net_advantage(obs, p).decision;
}

} // namespace saferl::regret
