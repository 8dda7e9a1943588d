#pragma once

#include "saferl/regret_model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace saferl::sim {

inline constexpr double kMaxAccel = 2.0;     ///< |a_x| bound [m/s^2]
inline constexpr double kLateralSpeed = 1.8; ///< |v_y| bound [m/s]
inline constexpr double kSenseRange = 100.0; ///< affordance clipping range [m]
inline constexpr double kSpeedScale = 16.67; ///< affordance velocity scale [m/s]

struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double v_x = 0.0;
    double v_y = 0.0;
    double a_x = 0.0;
};

enum class VehicleRole { Ego, Manual };
enum class LaneSide { Right, Left };
enum class Maneuver { None, ChangingLane };

struct Vehicle {
    VehicleState state;
    VehicleRole role = VehicleRole::Manual;
    double best_speed = 0.0;               ///< unused for the ego
    LaneSide lane_target = LaneSide::Right; ///< lane being tracked
    Maneuver maneuver = Maneuver::None;
    double decision_cooldown = 0.0;        ///< seconds until the next lane-change evaluation
};

struct RoadConfig {
    double length = 400.0;
    double lane_width = 3.5;
    double vehicle_length = 4.5;
    double vehicle_width = 2.0;

    double lane_center(LaneSide s) const {
        return s == LaneSide::Right ? -0.5 * lane_width : 0.5 * lane_width;
    }
    LaneSide lane_of(double y) const { return y >= 0.0 ? LaneSide::Left : LaneSide::Right; }
    LaneSide other_lane(LaneSide s) const {
        return s == LaneSide::Right ? LaneSide::Left : LaneSide::Right;
    }
};

enum class EgoAction { LaneLeft = 0, LaneRight = 1, Accelerate = 2, Decelerate = 3, Maintain = 4 };
inline constexpr int kActionCount = 5;
const char* action_name(EgoAction a);

/// The per-step command an action stands for.
struct ActionCommand {
    double a_x = 0.0;
    double v_y = 0.0;
};
ActionCommand action_command(EgoAction a);

/// Twelve indicators, every one normalized into [-1, 1].
struct AffordanceVector {
    double d_fr = 1.0, v_fr = 0.0; ///< front right-lane neighbor
    double d_fl = 1.0, v_fl = 0.0; ///< front left-lane neighbor
    double d_rr = 1.0, v_rr = 0.0; ///< rear right-lane neighbor
    double d_rl = 1.0, v_rl = 0.0; ///< rear left-lane neighbor
    double y = 0.0;
    double v_x = 0.0;
    double v_y = 0.0;
    double prev_a_x = 0.0;

    std::vector<double> to_vector() const {
        return {d_fr, v_fr, d_fl, v_fl, d_rr, v_rr, d_rl, v_rl, y, v_x, v_y, prev_a_x};
    }
};

struct RewardConfig {
    double w_s = 2000.0;
    double w_v = 10.0;
    double w_c = 3.0;
    double w_h = 15.0;
    double v_min = 5.56;
    double v_target = 12.5;
    double v_max = 16.67;
    double center_band = 0.5;   ///< lateral offset beyond which r_c fires [m]
    double safe_distance = 18.0; ///< headway distance floor [m]
    double min_headway = 2.0;    ///< closing-time floor [s]
};

struct RewardBreakdown {
    double r_s = 0.0;
    double r_v = 0.0;
    double r_c = 0.0;
    double r_h = 0.0;
    double total = 0.0;
};

enum class Terminal { None, Collision, OffRoad, GoalReached, TimeLimit };
const char* terminal_name(Terminal t);

struct Scene {
    RoadConfig road;
    RewardConfig reward;
    regret::RegretParams mv_params; ///< shared driver profile of every MV
    std::vector<Vehicle> vehicles;  ///< vehicles[0] is the ego
    int step_count = 0;
    int max_steps = 600;
    double prev_ego_a_x = 0.0;      ///< ego command of the previous step
    Terminal terminal = Terminal::None;

    const Vehicle& ego() const { return vehicles.front(); }
    Vehicle& ego() { return vehicles.front(); }
};

struct StepOutcome {
    Scene next;
    RewardBreakdown reward;
    Terminal terminal = Terminal::None;
};

/// What a manual vehicle sees when weighing a lane change. The observation
/// is only present when a blocked vehicle faces an actual approacher in the
/// target lane; certain-success and overlap shortcuts are folded into
/// `decision`.
struct LaneChangeAssessment {
    bool blocked = false;
    bool slot_occupied = false; ///< target-lane vehicle overlaps or sits close ahead
    int leader = -1;
    int approacher = -1;
    std::optional<regret::LaneChangeObservation> obs;
    regret::LaneDecision decision = regret::LaneDecision::KeepLane;
};

/// The command a manual vehicle issues for the coming step.
struct MvCommand {
    double a_x = 0.0;
    double v_y = 0.0;
    bool evaluated = false;         ///< a lane-change decision was taken this step
    bool begin_lane_change = false; ///< decision was ChangeLane
};

/// Fixed overtaking scene: ego in the left lane at 12.5 m/s, a slow MV
/// ahead in the right lane wanting 12.5 m/s, and its slower leader. The
/// seed jitters every initial x by at most 2 m.
Scene init_scene(const RoadConfig& road, std::uint64_t seed);

/// Explicit Euler: x advances with the pre-update v_x; v_x floors at 0.
VehicleState euler_step(const VehicleState& state, double dt);

/// Proportional lateral convergence toward target_y, clamped to the lateral
/// speed limit; one step lands exactly on target once within reach.
double lateral_speed_toward(double target_y, double y, double dt);

/// Lane-change reasoning for vehicles[index], from the current scene only.
LaneChangeAssessment assess_lane_change(const Scene& scene, std::size_t index,
                                        const regret::RegretParams& params);

/// High-level decision (at most once per second while blocked) plus
/// proportional speed tracking toward best speed or the leader's speed.
MvCommand mv_policy(const Scene& scene, std::size_t index,
                    const regret::RegretParams& params, double dt);

/// Advance everything one tick: ego command, MV policies, Euler moves,
/// maneuver snapping, terminal detection, reward.
StepOutcome step(const Scene& scene, EgoAction ego_action, double dt);

/// First pair of vehicles whose rectangles overlap: |dx| < length AND
/// |dy| < width, both strict.
std::optional<std::pair<std::size_t, std::size_t>> check_collision(const Scene& scene);

AffordanceVector extract_affordances(const Scene& scene);

RewardBreakdown reward_components(const Scene& after, bool collided, const RewardConfig& cfg);

/// One JSON line per scene: step index plus per-vehicle x, y, v_x, v_y, role.
std::string scene_jsonl(const Scene& scene);

} // namespace saferl::sim
