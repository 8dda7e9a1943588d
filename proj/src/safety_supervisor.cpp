#include "saferl/safety_supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace saferl::safety {

int SupervisorConfig::horizon_steps() const {
    return static_cast<int>(std::ceil(t_pred / dt - 1e-9));
}

void SupervisorConfig::validate() const {
    if (!(t_pred > 0.0)) throw std::domain_error("t_pred must be positive");
    if (!(dt > 0.0)) throw std::domain_error("prediction dt must be positive");
    if (!(lateral_bound > 0.0) || !(longitudinal_bound > 0.0) || !(offroad_bound > 0.0))
        throw std::domain_error("conflict bounds must be positive");
}

const char* verdict_kind_name(SafetyVerdict::Kind kind) {
    switch (kind) {
        case SafetyVerdict::Kind::Safe: return "Safe";
        case SafetyVerdict::Kind::UnsafeCollision: return "UnsafeCollision";
        case SafetyVerdict::Kind::UnsafeOffRoad: return "UnsafeOffRoad";
    }
    return "Safe";
}

namespace {

/// Lateral center an MV is predicted to steer toward; empty when it is
/// predicted to hold its line.
std::optional<double> predicted_mv_target(const sim::Scene& scene, std::size_t index,
                                          const regret::RegretParams& params) {
    const sim::Vehicle& v = scene.vehicles[index];
    if (v.maneuver == sim::Maneuver::ChangingLane)
        return scene.road.lane_center(v.lane_target);
    const auto assessment = sim::assess_lane_change(scene, index, params);
    if (assessment.decision == regret::LaneDecision::ChangeLane)
        return scene.road.lane_center(
            scene.road.other_lane(scene.road.lane_of(v.state.y)));
    return std::nullopt;
}

std::vector<sim::VehicleState> roll_constant_speed(sim::VehicleState st,
                                                   std::optional<double> target_y,
                                                   const SupervisorConfig& cfg) {
    const int horizon = cfg.horizon_steps();
    std::vector<sim::VehicleState> steps;
    steps.reserve(static_cast<std::size_t>(horizon));
    st.a_x = 0.0;
    for (int k = 0; k < horizon; ++k) {
        st.v_y = target_y ? sim::lateral_speed_toward(*target_y, st.y, cfg.dt) : 0.0;
        st = sim::euler_step(st, cfg.dt);
        steps.push_back(st);
    }
    return steps;
}

sim::EgoAction category_replacement(sim::EgoAction a) {
    switch (a) {
        case sim::EgoAction::LaneLeft:
        case sim::EgoAction::LaneRight: return sim::EgoAction::Maintain;
        case sim::EgoAction::Accelerate:
        case sim::EgoAction::Decelerate:
        case sim::EgoAction::Maintain: return sim::EgoAction::Decelerate;
    }
    return sim::EgoAction::Decelerate;
}

/// Worst-case separation margin of an action. The primary term is the
/// minimum over predicted steps and vehicles of max(|dx|/longitudinal,
/// |dy|/lateral): safe actions score >= 1 on it, unsafe ones < 1, so a safe
/// candidate always beats every unsafe one. The max() saturates when one
/// axis dominates, which ties actions that differ only on the other axis;
/// the secondary term, the same minimum taken over the axis-ratio sums,
/// keeps full separation ordering for that case. Any off-road step pins
/// both terms to -1.
struct SeparationScore {
    double primary = std::numeric_limits<double>::infinity();
    double secondary = std::numeric_limits<double>::infinity();

    bool operator>(const SeparationScore& o) const {
        if (primary != o.primary) return primary > o.primary;
        return secondary > o.secondary;
    }
};

SeparationScore separation_score(const sim::Scene& scene, sim::EgoAction action,
                                 const regret::RegretParams& params,
                                 const SupervisorConfig& cfg) {
    const auto ego = predict_ego_trajectory(scene, action, cfg);
    const auto mvs = predict_mv_trajectories(scene, params, cfg);
    SeparationScore score;
    for (std::size_t k = 0; k < ego.size(); ++k) {
        if (std::fabs(ego[k].y) > cfg.offroad_bound) return {-1.0, -1.0};
        for (const auto& mv : mvs) {
            const double dx = std::fabs(mv[k].x - ego[k].x) / cfg.longitudinal_bound;
            const double dy = std::fabs(mv[k].y - ego[k].y) / cfg.lateral_bound;
            score.primary = std::min(score.primary, std::max(dx, dy));
            score.secondary = std::min(score.secondary, dx + dy);
        }
    }
    return score;
}

} // namespace

std::vector<std::vector<sim::VehicleState>> predict_mv_trajectories(
    const sim::Scene& scene, const regret::RegretParams& params,
    const SupervisorConfig& cfg) {
    std::vector<std::vector<sim::VehicleState>> out;
    out.reserve(scene.vehicles.size() - 1);
    for (std::size_t i = 1; i < scene.vehicles.size(); ++i)
        out.push_back(roll_constant_speed(scene.vehicles[i].state,
                                          predicted_mv_target(scene, i, params), cfg));
    return out;
}

std::vector<sim::VehicleState> predict_ego_trajectory(const sim::Scene& scene,
                                                      sim::EgoAction action,
                                                      const SupervisorConfig& cfg) {
    const sim::ActionCommand cmd = sim::action_command(action);
    const int horizon = cfg.horizon_steps();
    std::vector<sim::VehicleState> steps;
    steps.reserve(static_cast<std::size_t>(horizon));
    sim::VehicleState st = scene.ego().state;
    for (int k = 0; k < horizon; ++k) {
        st.a_x = cmd.a_x;
        st.v_y = cmd.v_y;
        st = sim::euler_step(st, cfg.dt);
        steps.push_back(st);
    }
    return steps;
}

SafetyVerdict check_action(const sim::Scene& scene, sim::EgoAction action,
                           const regret::RegretParams& params,
                           const SupervisorConfig& cfg) {
    const auto ego = predict_ego_trajectory(scene, action, cfg);
    const auto mvs = predict_mv_trajectories(scene, params, cfg);
    for (std::size_t k = 0; k < ego.size(); ++k) {
        const int step = static_cast<int>(k) + 1;
        if (std::fabs(ego[k].y) > cfg.offroad_bound) return SafetyVerdict::off_road(step);
        for (std::size_t m = 0; m < mvs.size(); ++m) {
            const double dx = std::fabs(mvs[m][k].x - ego[k].x);
            const double dy = std::fabs(mvs[m][k].y - ego[k].y);
            if (dy < cfg.lateral_bound && dx < cfg.longitudinal_bound)
                return SafetyVerdict::collision(m + 1, step);
        }
    }
    return SafetyVerdict::safe();
}

sim::EgoAction replace_action(sim::EgoAction action, const SafetyVerdict& verdict,
                              const sim::Scene& scene,
                              const regret::RegretParams& params,
                              const SupervisorConfig& cfg) {
    if (verdict.is_safe())
        throw std::logic_error("replace_action needs an unsafe verdict");

    sim::EgoAction candidate = action;
    for (int hop = 0; hop < 2; ++hop) {
        const sim::EgoAction next = category_replacement(candidate);
        if (next == candidate) break;
        candidate = next;
        if (check_action(scene, candidate, params, cfg).is_safe()) return candidate;
    }

    // Every category candidate is still predicted unsafe; pick the widest
    // worst-case margin, ties to the lowest action index.
    sim::EgoAction best = sim::EgoAction::LaneLeft;
    SeparationScore best_score{-std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()};
    for (int a = 0; a < sim::kActionCount; ++a) {
        const SeparationScore s =
            separation_score(scene, static_cast<sim::EgoAction>(a), params, cfg);
        if (s > best_score) {
            best_score = s;
            best = static_cast<sim::EgoAction>(a);
        }
    }
    return best;
}

SupervisionResult supervise(const sim::Scene& scene, sim::EgoAction proposed,
                            const regret::RegretParams& params,
                            const SupervisorConfig& cfg) {
    SupervisionResult out;
    out.executed = proposed;
    if (!cfg.enabled) return out;

    const SafetyVerdict verdict = check_action(scene, proposed, params, cfg);
    if (verdict.is_safe()) return out;

    out.executed = replace_action(proposed, verdict, scene, params, cfg);
    out.veto = VetoRecord{proposed, verdict};

    rl::Experience unsafe;
    unsafe.s = sim::extract_affordances(scene);
    unsafe.a = proposed;
    unsafe.next = std::nullopt;
    unsafe.r = cfg.collision_reward;
    out.unsafe_experience = unsafe;
    return out;
}

} // namespace saferl::safety
