#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "saferl/ddqn_agent.hpp"
#include "saferl/highway_sim.hpp"
#include "saferl/regret_model.hpp"

namespace saferl::safety {

struct SupervisorConfig {
    double t_pred = 0.7;             ///< lookahead window [s]
    double dt = 0.1;                 ///< prediction step [s]
    double lateral_bound = 2.5;      ///< |dy| below this counts as same corridor [m]
    double longitudinal_bound = 18.0; ///< |dx| below this counts as conflict [m]
    double offroad_bound = 2.0;      ///< |y| beyond this leaves the road [m]
    double collision_reward = -2000.0;
    bool enabled = true;

    /// Number of predicted steps covering t_pred.
    int horizon_steps() const;
    void validate() const;
};

struct SafetyVerdict {
    enum class Kind { Safe, UnsafeCollision, UnsafeOffRoad };

    Kind kind = Kind::Safe;
    std::size_t vehicle = 0; ///< scene index, collision verdicts only
    int step = 0;            ///< first violating predicted step, 1-based

    bool is_safe() const { return kind == Kind::Safe; }

    static SafetyVerdict safe() { return {}; }
    static SafetyVerdict collision(std::size_t vehicle, int step) {
        return {Kind::UnsafeCollision, vehicle, step};
    }
    static SafetyVerdict off_road(int step) { return {Kind::UnsafeOffRoad, 0, step}; }
};

const char* verdict_kind_name(SafetyVerdict::Kind kind);

struct VetoRecord {
    sim::EgoAction original = sim::EgoAction::Maintain;
    SafetyVerdict verdict;
};

struct SupervisionResult {
    sim::EgoAction executed = sim::EgoAction::Maintain;
    std::optional<VetoRecord> veto;
    /// Present exactly when veto is: the proposed transition recorded as a
    /// terminal penalty for the replay buffer.
    std::optional<rl::Experience> unsafe_experience;
};

/// Each manual vehicle rolled horizon_steps() forward at constant v_x. A
/// vehicle predicted (or already committed) to change lanes drifts toward
/// the other lane's center at the lateral speed limit; everyone else holds
/// their line.
std::vector<std::vector<sim::VehicleState>> predict_mv_trajectories(
    const sim::Scene& scene, const regret::RegretParams& params,
    const SupervisorConfig& cfg);

/// Ego rolled forward under the action's constant (a_x, v_y) command.
std::vector<sim::VehicleState> predict_ego_trajectory(const sim::Scene& scene,
                                                      sim::EgoAction action,
                                                      const SupervisorConfig& cfg);

/// Scans predicted steps 1..horizon in order; within a step the off-road
/// test precedes the per-vehicle conflict tests (ascending scene index).
/// The first violation is reported.
SafetyVerdict check_action(const sim::Scene& scene, sim::EgoAction action,
                           const regret::RegretParams& params,
                           const SupervisorConfig& cfg);

/// Category replacement (lane change -> Maintain, otherwise -> Decelerate),
/// re-checked and chained; when every candidate stays unsafe, falls back to
/// the action with the widest worst-case separation margin.
sim::EgoAction replace_action(sim::EgoAction action, const SafetyVerdict& verdict,
                              const sim::Scene& scene,
                              const regret::RegretParams& params,
                              const SupervisorConfig& cfg);

/// Full gate: pass-through when disabled or safe; otherwise substitutes a
/// replacement and emits the veto record plus the penalty experience.
SupervisionResult supervise(const sim::Scene& scene, sim::EgoAction proposed,
                            const regret::RegretParams& params,
                            const SupervisorConfig& cfg);

} // namespace saferl::safety
