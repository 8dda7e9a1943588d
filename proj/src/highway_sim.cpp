#include "saferl/highway_sim.hpp"

#include "saferl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace saferl::sim {

namespace {

constexpr double kBlockedRange = 50.0;      // leader relevance range [m], bumper gap
constexpr double kBlockedSpeedSlack = 0.5;  // leader this much below v_b blocks [m/s]
constexpr double kSnapBand = 0.05;          // lane-center capture width [m]
constexpr double kDecisionPeriod = 1.0;     // seconds between lane-change evaluations

double bumper_gap(const Scene& scene, std::size_t a, std::size_t b) {
    return std::fabs(scene.vehicles[a].state.x - scene.vehicles[b].state.x)
         - scene.road.vehicle_length;
}

/// Nearest vehicle ahead of `idx` whose lateral position is in `lane`.
int front_neighbor(const Scene& scene, std::size_t idx, LaneSide lane) {
    const double x0 = scene.vehicles[idx].state.x;
    int best = -1;
    double best_x = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scene.vehicles.size(); ++j) {
        if (j == idx) continue;
        const auto& v = scene.vehicles[j];
        if (scene.road.lane_of(v.state.y) != lane) continue;
        if (v.state.x > x0 && v.state.x < best_x) {
            best = static_cast<int>(j);
            best_x = v.state.x;
        }
    }
    return best;
}

/// Nearest target-lane vehicle that is behind `idx` or still overlapping it
/// longitudinally; a vehicle fully clear ahead is no approacher.
int rear_approacher(const Scene& scene, std::size_t idx, LaneSide lane) {
    const double x0 = scene.vehicles[idx].state.x;
    int best = -1;
    double best_x = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scene.vehicles.size(); ++j) {
        if (j == idx) continue;
        const auto& v = scene.vehicles[j];
        if (scene.road.lane_of(v.state.y) != lane) continue;
        if (v.state.x < x0 + scene.road.vehicle_length && v.state.x > best_x) {
            best = static_cast<int>(j);
            best_x = v.state.x;
        }
    }
    return best;
}

double lateral_track(const Scene& scene, const Vehicle& v, LaneSide target, double dt) {
    return lateral_speed_toward(scene.road.lane_center(target), v.state.y, dt);
}

} // namespace

double lateral_speed_toward(double target_y, double y, double dt) {
    return std::clamp((target_y - y) / dt, -kLateralSpeed, kLateralSpeed);
}

const char* action_name(EgoAction a) {
    switch (a) {
        case EgoAction::LaneLeft: return "LaneLeft";
        case EgoAction::LaneRight: return "LaneRight";
        case EgoAction::Accelerate: return "Accelerate";
        case EgoAction::Decelerate: return "Decelerate";
        case EgoAction::Maintain: return "Maintain";
    }
    return "?";
}

const char* terminal_name(Terminal t) {
    switch (t) {
        case Terminal::None: return "None";
        case Terminal::Collision: return "Collision";
        case Terminal::OffRoad: return "OffRoad";
        case Terminal::GoalReached: return "GoalReached";
        case Terminal::TimeLimit: return "TimeLimit";
    }
    return "?";
}

ActionCommand action_command(EgoAction a) {
    switch (a) {
        case EgoAction::LaneLeft: return {0.0, kLateralSpeed};
        case EgoAction::LaneRight: return {0.0, -kLateralSpeed};
        case EgoAction::Accelerate: return {kMaxAccel, 0.0};
        case EgoAction::Decelerate: return {-kMaxAccel, 0.0};
        case EgoAction::Maintain: return {0.0, 0.0};
    }
    return {};
}

Scene init_scene(const RoadConfig& road, std::uint64_t seed) {
    Rng rng(seed);
    Scene scene;
    scene.road = road;
    const double right = road.lane_center(LaneSide::Right);
    const double left = road.lane_center(LaneSide::Left);

    Vehicle ego;
    ego.role = VehicleRole::Ego;
    ego.state = {45.5 + rng.uniform(-2.0, 2.0), left, 12.5, 0.0, 0.0};
    ego.lane_target = LaneSide::Left;

    Vehicle slow;                       // wants to overtake its leader
    slow.role = VehicleRole::Manual;
    slow.state = {60.0 + rng.uniform(-2.0, 2.0), right, 5.56, 0.0, 0.0};
    slow.best_speed = 12.5;
    slow.lane_target = LaneSide::Right;

    Vehicle leader;                     // content at its cruise speed
    leader.role = VehicleRole::Manual;
    leader.state = {84.5 + rng.uniform(-2.0, 2.0), right, 5.56, 0.0, 0.0};
    leader.best_speed = 5.56;
    leader.lane_target = LaneSide::Right;

    scene.vehicles = {ego, slow, leader};
    return scene;
}

VehicleState euler_step(const VehicleState& state, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    VehicleState next = state;
    next.x = state.x + state.v_x * dt;
    next.y = state.y + state.v_y * dt;
    next.v_x = std::max(0.0, state.v_x + state.a_x * dt);
    return next;
}

LaneChangeAssessment assess_lane_change(const Scene& scene, std::size_t index,
                                        const regret::RegretParams& params) {
    LaneChangeAssessment out;
    const auto& v = scene.vehicles[index];
    const LaneSide lane = scene.road.lane_of(v.state.y);
    const LaneSide target = scene.road.other_lane(lane);

    out.leader = front_neighbor(scene, index, lane);
    if (out.leader < 0) return out;
    const auto& lead = scene.vehicles[static_cast<std::size_t>(out.leader)];
    const double lead_gap = bumper_gap(scene, index, static_cast<std::size_t>(out.leader));
    out.blocked = lead_gap < kBlockedRange
               && lead.state.v_x < v.best_speed - kBlockedSpeedSlack;
    if (!out.blocked) return out;

    // A crawling leader is the car-following law's problem, not a reason
    // to squeeze past.
    if (lead.state.v_x <= regret::LaneChangeObservation::kMinLeaderSpeed) return out;

    // The regret comparison weighs only traffic approaching from behind
    // and presumes the slot ahead in the target lane is open. A vehicle
    // overlapping the MV there, or ahead within the safe distance, makes
    // the move unavailable.
    for (std::size_t j = 0; j < scene.vehicles.size(); ++j) {
        if (j == index) continue;
        const auto& other = scene.vehicles[j].state;
        if (scene.road.lane_of(other.y) != target) continue;
        const double dx = other.x - v.state.x;
        if (dx > -scene.road.vehicle_length
            && dx - scene.road.vehicle_length < scene.reward.safe_distance) {
            out.slot_occupied = true;
            return out;
        }
    }

    out.approacher = rear_approacher(scene, index, target);
    if (out.approacher < 0
        || scene.vehicles[static_cast<std::size_t>(out.approacher)].state.v_x <= 0.0) {
        // Nobody closing from behind: success is certain, and blocked
        // implies the move pays off.
        out.decision = regret::LaneDecision::ChangeLane;
        return out;
    }
    const auto& app = scene.vehicles[static_cast<std::size_t>(out.approacher)];
    const double app_gap =
        std::max(0.0, bumper_gap(scene, index, static_cast<std::size_t>(out.approacher)));
    out.obs.emplace(lead.state.v_x, v.state.v_x, app.state.v_x, v.best_speed, app_gap);
    out.decision = regret::decide(*out.obs, params);
    return out;
}

MvCommand mv_policy(const Scene& scene, std::size_t index,
                    const regret::RegretParams& params, double dt) {
    const auto& v = scene.vehicles[index];
    if (v.role != VehicleRole::Manual) throw std::invalid_argument("mv_policy needs a manual vehicle");
    MvCommand cmd;

    if (v.maneuver == Maneuver::ChangingLane) {
        cmd.v_y = lateral_track(scene, v, v.lane_target, dt);
    } else if (v.decision_cooldown <= 0.0) {
        const auto assessment = assess_lane_change(scene, index, params);
        if (assessment.blocked) {
            cmd.evaluated = true;
            if (assessment.decision == regret::LaneDecision::ChangeLane) {
                cmd.begin_lane_change = true;
                cmd.v_y = lateral_track(
                    scene, v, scene.road.other_lane(scene.road.lane_of(v.state.y)), dt);
            }
        }
    }

    double v_des = v.best_speed;
    const int lead = front_neighbor(scene, index, scene.road.lane_of(v.state.y));
    if (lead >= 0) {
        const double gap = std::max(0.0, bumper_gap(scene, index, static_cast<std::size_t>(lead)));
        const double headway = v.state.v_x > 0.01 ? gap / v.state.v_x
                                                  : std::numeric_limits<double>::infinity();
        if (headway < scene.reward.min_headway) {
            v_des = scene.vehicles[static_cast<std::size_t>(lead)].state.v_x;
        }
    }
    cmd.a_x = std::clamp(v_des - v.state.v_x, -kMaxAccel, kMaxAccel);
    return cmd;
}

StepOutcome step(const Scene& scene, EgoAction ego_action, double dt) {
    if (scene.terminal != Terminal::None) {
        throw std::logic_error("cannot step a terminal scene");
    }
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");

    Scene next = scene;
    const ActionCommand ego_cmd = action_command(ego_action);
    next.ego().state.a_x = ego_cmd.a_x;
    next.ego().state.v_y = ego_cmd.v_y;

    for (std::size_t i = 1; i < scene.vehicles.size(); ++i) {
        const MvCommand cmd = mv_policy(scene, i, scene.mv_params, dt);
        auto& veh = next.vehicles[i];
        veh.state.a_x = cmd.a_x;
        veh.state.v_y = cmd.v_y;
        veh.decision_cooldown =
            cmd.evaluated ? kDecisionPeriod : scene.vehicles[i].decision_cooldown - dt;
        if (cmd.begin_lane_change) {
            veh.maneuver = Maneuver::ChangingLane;
            veh.lane_target = scene.road.other_lane(scene.road.lane_of(veh.state.y));
        }
    }

    for (auto& veh : next.vehicles) veh.state = euler_step(veh.state, dt);

    for (std::size_t i = 1; i < next.vehicles.size(); ++i) {
        auto& veh = next.vehicles[i];
        if (veh.maneuver != Maneuver::ChangingLane) continue;
        const double c = next.road.lane_center(veh.lane_target);
        if (std::fabs(veh.state.y - c) < kSnapBand) {
            veh.state.y = c;
            veh.state.v_y = 0.0;
            veh.maneuver = Maneuver::None;
        }
    }

    next.step_count += 1;
    next.prev_ego_a_x = ego_cmd.a_x;

    const auto collision = check_collision(next);
    Terminal terminal = Terminal::None;
    if (collision) {
        terminal = Terminal::Collision;
    } else if (std::fabs(next.ego().state.y) > 2.0) {
        terminal = Terminal::OffRoad;
    } else if (next.ego().state.x >= next.road.length) {
        terminal = Terminal::GoalReached;
    } else if (next.step_count >= next.max_steps) {
        terminal = Terminal::TimeLimit;
    }
    next.terminal = terminal;

    StepOutcome out;
    out.reward = reward_components(next, collision.has_value(), next.reward);
    out.terminal = terminal;
    out.next = std::move(next);
    return out;
}

std::optional<std::pair<std::size_t, std::size_t>> check_collision(const Scene& scene) {
    for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.vehicles.size(); ++j) {
            const auto& a = scene.vehicles[i].state;
            const auto& b = scene.vehicles[j].state;
            if (std::fabs(a.x - b.x) < scene.road.vehicle_length
                && std::fabs(a.y - b.y) < scene.road.vehicle_width) {
                return std::make_pair(i, j);
            }
        }
    }
    return std::nullopt;
}

AffordanceVector extract_affordances(const Scene& scene) {
    const auto& ego = scene.ego().state;
    AffordanceVector out;

    struct Slot {
        double* d;
        double* v;
        double nearest = std::numeric_limits<double>::infinity();
    };
    Slot slots[4] = {{&out.d_fr, &out.v_fr}, {&out.d_fl, &out.v_fl},
                     {&out.d_rr, &out.v_rr}, {&out.d_rl, &out.v_rl}};

    for (std::size_t j = 1; j < scene.vehicles.size(); ++j) {
        const auto& other = scene.vehicles[j].state;
        const bool front = other.x >= ego.x;
        const bool left = scene.road.lane_of(other.y) == LaneSide::Left;
        const double dx = std::fabs(other.x - ego.x);
        Slot& slot = slots[(front ? 0 : 2) + (left ? 1 : 0)];
        if (dx >= slot.nearest) continue;
        slot.nearest = dx;
        const double gap = std::clamp(dx - scene.road.vehicle_length, 0.0, kSenseRange);
        *slot.d = 2.0 * gap / kSenseRange - 1.0;
        *slot.v = std::clamp(other.v_x - ego.v_x, -kSpeedScale, kSpeedScale) / kSpeedScale;
    }

    out.y = std::clamp(ego.y / scene.road.lane_width, -1.0, 1.0);
    out.v_x = std::clamp(2.0 * ego.v_x / kSpeedScale - 1.0, -1.0, 1.0);
    out.v_y = std::clamp(ego.v_y / kLateralSpeed, -1.0, 1.0);
    out.prev_a_x = std::clamp(scene.prev_ego_a_x / kMaxAccel, -1.0, 1.0);
    return out;
}

RewardBreakdown reward_components(const Scene& after, bool collided, const RewardConfig& cfg) {
    RewardBreakdown r;
    r.r_s = collided ? -1.0 : 0.0;

    const auto& ego = after.ego().state;
    const double v = ego.v_x;
    if (v > cfg.v_min && v <= cfg.v_target) {
        r.r_v = (v - cfg.v_min) / (cfg.v_target - cfg.v_min);
    } else if (v > cfg.v_target && v <= cfg.v_max) {
        r.r_v = (cfg.v_max - v) / (cfg.v_max - cfg.v_target);
    }

    const double center = after.road.lane_center(after.road.lane_of(ego.y));
    r.r_c = std::fabs(ego.y - center) >= cfg.center_band ? -1.0 : 0.0;

    const int lead = front_neighbor(after, 0, after.road.lane_of(ego.y));
    if (lead >= 0) {
        const auto& front = after.vehicles[static_cast<std::size_t>(lead)].state;
        const double gap = std::max(0.0, std::fabs(front.x - ego.x) - after.road.vehicle_length);
        const double closing = std::fabs(front.v_x - ego.v_x);
        const double ratio = closing < 0.01 ? std::numeric_limits<double>::infinity()
                                            : gap / closing;
        r.r_h = (ratio < cfg.min_headway || gap < cfg.safe_distance) ? -1.0 : 0.0;
    }

    r.total = cfg.w_s * r.r_s + cfg.w_v * r.r_v + cfg.w_c * r.r_c + cfg.w_h * r.r_h;
    return r;
}

std::string scene_jsonl(const Scene& scene) {
    nlohmann::json j;
    j["step"] = scene.step_count;
    auto& arr = j["vehicles"] = nlohmann::json::array();
    for (const auto& veh : scene.vehicles) {
        arr.push_back({{"role", veh.role == VehicleRole::Ego ? "ego" : "mv"},
                       {"x", veh.state.x},
                       {"y", veh.state.y},
                       {"v_x", veh.state.v_x},
                       {"v_y", veh.state.v_y}});
    }
    return j.dump();
}

} // namespace saferl::sim
