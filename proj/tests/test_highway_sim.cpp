#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saferl/highway_sim.hpp"
#include "saferl/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace saferl;
using namespace saferl::sim;

namespace {

constexpr double kDt = 0.1;

Scene base_scene() { return init_scene(RoadConfig{}, 12345); }

Scene bare_scene(std::vector<Vehicle> vehicles) {
    Scene s;
    s.vehicles = std::move(vehicles);
    return s;
}

Vehicle make_vehicle(double x, double y, double v_x, VehicleRole role, double v_b = 0.0) {
    Vehicle v;
    v.state = {x, y, v_x, 0.0, 0.0};
    v.role = role;
    v.best_speed = v_b;
    v.lane_target = y >= 0.0 ? LaneSide::Left : LaneSide::Right;
    return v;
}

} // namespace

TEST_CASE("scene initialization") {
    const auto a = init_scene(RoadConfig{}, 7);
    const auto b = init_scene(RoadConfig{}, 7);
    const auto c = init_scene(RoadConfig{}, 8);

    REQUIRE(a.vehicles.size() == 3);
    CHECK(a.vehicles[0].role == VehicleRole::Ego);
    CHECK(a.vehicles[1].role == VehicleRole::Manual);
    CHECK(a.vehicles[2].role == VehicleRole::Manual);

    CHECK(a.vehicles[0].state.y == 1.75);
    CHECK(a.vehicles[1].state.y == -1.75);
    CHECK(a.vehicles[2].state.y == -1.75);
    CHECK(a.vehicles[0].state.v_x == 12.5);
    CHECK(a.vehicles[1].state.v_x == 5.56);
    CHECK(a.vehicles[1].best_speed == 12.5);
    CHECK(a.vehicles[2].state.v_x == 5.56);
    CHECK(a.vehicles[2].best_speed == 5.56);

    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.vehicles[i].state.x == b.vehicles[i].state.x);
        const double base = i == 0 ? 45.5 : (i == 1 ? 60.0 : 84.5);
        CHECK(std::fabs(a.vehicles[i].state.x - base) <= 2.0);
        CHECK(std::fabs(c.vehicles[i].state.x - base) <= 2.0);
    }
    CHECK(a.vehicles[0].state.x != c.vehicles[0].state.x);
}

TEST_CASE("euler step arithmetic") {
    VehicleState s{0.0, 0.0, 10.0, 0.0, 2.0};
    const auto next = euler_step(s, 0.1);
    CHECK(next.v_x == doctest::Approx(10.2).epsilon(1e-15));
    CHECK(next.x == doctest::Approx(1.0).epsilon(1e-15));

    VehicleState cruise{5.0, 1.75, 8.0, 0.0, 0.0};
    const auto moved = euler_step(cruise, 0.1);
    CHECK(moved.x == doctest::Approx(5.8).epsilon(1e-15));
    CHECK(moved.y == 1.75);
    CHECK(moved.v_x == 8.0);

    VehicleState lateral{0.0, -1.75, 10.0, 1.8, 0.0};
    CHECK(euler_step(lateral, 0.1).y == doctest::Approx(-1.57).epsilon(1e-12));

    VehicleState braking{0.0, 0.0, 0.1, 0.0, -2.0};
    CHECK(euler_step(braking, 0.1).v_x == 0.0);

    CHECK_THROWS_AS(euler_step(s, 0.0), std::invalid_argument);
}

TEST_CASE("blocked vehicle keeps lane while an approacher is close") {
    // Overtaking scene at its reference geometry: slow MV boxed in by its
    // leader 10 m ahead, ego closing in the other lane 10 m behind.
    auto scene = bare_scene({make_vehicle(60.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(74.5, -1.75, 5.56, VehicleRole::Manual, 12.5),
                             make_vehicle(89.0, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
    CHECK(assessment.blocked);
    CHECK(assessment.leader == 2);
    CHECK(assessment.approacher == 0);
    REQUIRE(assessment.obs.has_value());
    CHECK(assessment.obs->d() == doctest::Approx(10.0).epsilon(1e-12));
    const auto trace = regret::net_advantage(*assessment.obs, scene.mv_params);
    CHECK(trace.e_ck == doctest::Approx(-1.6616363294404286031).epsilon(1e-9));
    CHECK(assessment.decision == regret::LaneDecision::KeepLane);

    const auto cmd = mv_policy(scene, 1, scene.mv_params, kDt);
    CHECK(cmd.evaluated);
    CHECK_FALSE(cmd.begin_lane_change);
    CHECK(cmd.v_y == 0.0);
}

TEST_CASE("certain-success gap starts the lane change") {
    // Ego far enough behind that t_c exceeds the safe duration.
    auto scene = bare_scene({make_vehicle(50.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(79.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                             make_vehicle(93.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    const double gap = 79.0 - 50.0 - 4.5;
    CHECK(gap >= 3.5193 * (12.5 - 5.56));
    const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
    CHECK(assessment.blocked);
    CHECK(assessment.decision == regret::LaneDecision::ChangeLane);

    const auto cmd = mv_policy(scene, 1, scene.mv_params, kDt);
    CHECK(cmd.begin_lane_change);
    CHECK(cmd.v_y == kLateralSpeed);
}

TEST_CASE("absent approacher makes the change certain") {
    auto scene = bare_scene({make_vehicle(100.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(70.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                             make_vehicle(84.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    // Ego is fully ahead in the target lane, so nothing approaches.
    const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
    CHECK(assessment.blocked);
    CHECK(assessment.approacher == -1);
    CHECK(assessment.decision == regret::LaneDecision::ChangeLane);
}

TEST_CASE("an occupied target-lane slot forbids the change") {
    SUBCASE("a vehicle right beside the MV") {
        auto scene = bare_scene({make_vehicle(71.0, 1.75, 12.5, VehicleRole::Ego),
                                 make_vehicle(70.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                                 make_vehicle(84.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
        const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
        CHECK(assessment.blocked);
        CHECK(assessment.slot_occupied);
        CHECK_FALSE(assessment.obs.has_value());
        CHECK(assessment.decision == regret::LaneDecision::KeepLane);
    }

    SUBCASE("a vehicle closely ahead in the target lane") {
        // Bumper gap 10 m < the 18 m safe distance.
        auto scene = bare_scene({make_vehicle(84.5, 1.75, 5.0, VehicleRole::Ego),
                                 make_vehicle(70.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                                 make_vehicle(84.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
        const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
        CHECK(assessment.blocked);
        CHECK(assessment.slot_occupied);
        CHECK(assessment.decision == regret::LaneDecision::KeepLane);

        const auto cmd = mv_policy(scene, 1, scene.mv_params, kDt);
        CHECK(cmd.evaluated);
        CHECK_FALSE(cmd.begin_lane_change);
    }

    SUBCASE("the slot reopens beyond the safe distance") {
        // Bumper gap exactly 18 m is open (strict comparison), and the
        // stopped ego behind poses no approach risk.
        auto scene = bare_scene({make_vehicle(50.0, 1.75, 0.0, VehicleRole::Ego),
                                 make_vehicle(70.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                                 make_vehicle(84.5, -1.75, 5.0, VehicleRole::Manual, 5.0),
                                 make_vehicle(92.5, 1.75, 12.5, VehicleRole::Manual, 12.5)});
        const auto assessment = assess_lane_change(scene, 1, scene.mv_params);
        CHECK(assessment.blocked);
        CHECK_FALSE(assessment.slot_occupied);
        CHECK(assessment.decision == regret::LaneDecision::ChangeLane);
    }
}

TEST_CASE("unblocked vehicle cruises") {
    auto scene = base_scene();
    // Vehicle 2 has nobody ahead and sits at its best speed.
    const auto cmd = mv_policy(scene, 2, scene.mv_params, kDt);
    CHECK(cmd.a_x == 0.0);
    CHECK(cmd.v_y == 0.0);
    CHECK_FALSE(cmd.evaluated);
}

TEST_CASE("car following tracks the leader speed inside the headway floor") {
    auto scene = bare_scene({make_vehicle(300.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(70.0, -1.75, 8.0, VehicleRole::Manual, 12.5),
                             make_vehicle(84.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    // Gap 10 m at 8 m/s: headway 1.25 s < 2 s, so desire drops to 5.56.
    const auto cmd = mv_policy(scene, 1, scene.mv_params, kDt);
    CHECK(cmd.a_x == doctest::Approx(-2.0).epsilon(1e-12));

    // Far behind the leader the same vehicle accelerates toward 12.5.
    scene.vehicles[1].state.x = 30.0;
    const auto far_cmd = mv_policy(scene, 1, scene.mv_params, kDt);
    CHECK(far_cmd.a_x == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("lane change runs to the far center in about twenty steps") {
    auto scene = bare_scene({make_vehicle(300.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(60.0, -1.75, 5.56, VehicleRole::Manual, 12.5),
                             make_vehicle(74.5, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    scene.max_steps = 1000;
    int start_step = -1, end_step = -1;
    for (int i = 0; i < 60; ++i) {
        const auto out = step(scene, EgoAction::Maintain, kDt);
        scene = out.next;
        REQUIRE(out.terminal == Terminal::None);
        const auto& mv = scene.vehicles[1];
        CHECK(std::fabs(mv.state.v_y) <= kLateralSpeed + 1e-12);
        if (start_step < 0 && mv.maneuver == Maneuver::ChangingLane) start_step = i;
        if (start_step >= 0 && end_step < 0 && mv.maneuver == Maneuver::None) {
            end_step = i;
            CHECK(mv.state.y == 1.75);
            CHECK(mv.state.v_y == 0.0);
        }
        if (start_step >= 0 && end_step < 0 && i > start_step) {
            // Committed: no fresh evaluation happens mid-maneuver.
            CHECK(mv.maneuver == Maneuver::ChangingLane);
        }
    }
    REQUIRE(start_step >= 0);
    REQUIRE(end_step > start_step);
    const int duration = end_step - start_step;
    CHECK(duration >= 19);
    CHECK(duration <= 20);
}

TEST_CASE("collision geometry") {
    auto scene = bare_scene({make_vehicle(100.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(103.0, 1.75, 5.0, VehicleRole::Manual, 5.0)});
    const auto hit = check_collision(scene);
    REQUIRE(hit.has_value());
    CHECK(hit->first == 0);
    CHECK(hit->second == 1);

    scene.vehicles[1].state.y = 1.75 + 3.5;
    CHECK_FALSE(check_collision(scene).has_value());

    scene.vehicles[1].state.y = 1.75;
    scene.vehicles[1].state.x = 104.5;
    CHECK_FALSE(check_collision(scene).has_value());
}

TEST_CASE("stepping applies commands and flags terminals") {
    auto scene = base_scene();
    const auto out = step(scene, EgoAction::Accelerate, kDt);
    CHECK(out.terminal == Terminal::None);
    CHECK(out.next.ego().state.v_x == doctest::Approx(12.7).epsilon(1e-12));
    CHECK(out.next.prev_ego_a_x == 2.0);
    CHECK(out.next.step_count == 1);

    // Goal: place the ego just short of the end.
    auto near_goal = base_scene();
    near_goal.ego().state.x = 399.5;
    const auto goal = step(near_goal, EgoAction::Maintain, kDt);
    CHECK(goal.terminal == Terminal::GoalReached);

    // Off-road: ego just inside the boundary, moving out.
    auto near_edge = base_scene();
    near_edge.ego().state.y = 1.93;
    const auto off = step(near_edge, EgoAction::LaneLeft, kDt);
    CHECK(off.terminal == Terminal::OffRoad);
    CHECK(std::fabs(off.next.ego().state.y) > 2.0);

    // Collision: a slow wall right in front of the ego.
    auto near_hit = base_scene();
    near_hit.vehicles[1].state.x = near_hit.ego().state.x + 4.6;
    near_hit.vehicles[1].state.y = 1.75;
    const auto hit = step(near_hit, EgoAction::Maintain, kDt);
    CHECK(hit.terminal == Terminal::Collision);
    CHECK(hit.reward.r_s == -1.0);
    CHECK_THROWS_AS(step(hit.next, EgoAction::Maintain, kDt), std::logic_error);

    // Time cap.
    auto capped = base_scene();
    capped.max_steps = 1;
    CHECK(step(capped, EgoAction::Decelerate, kDt).terminal == Terminal::TimeLimit);
}

TEST_CASE("reward components") {
    RewardConfig cfg;

    auto scene = bare_scene({make_vehicle(100.0, 1.75, 12.5, VehicleRole::Ego)});
    auto r = reward_components(scene, false, cfg);
    CHECK(r.r_v == 1.0);
    CHECK(r.r_c == 0.0);
    CHECK(r.r_h == 0.0);
    CHECK(r.total == 10.0);

    scene.ego().state.v_x = 9.0;
    r = reward_components(scene, false, cfg);
    CHECK(r.r_v == doctest::Approx(0.49567723342939481268).epsilon(1e-12));

    scene.ego().state.v_x = 5.56;
    CHECK(reward_components(scene, false, cfg).r_v == 0.0);
    scene.ego().state.v_x = 16.68;
    CHECK(reward_components(scene, false, cfg).r_v == 0.0);
    scene.ego().state.v_x = 12.5 - 1e-9;
    CHECK(reward_components(scene, false, cfg).r_v == doctest::Approx(1.0).epsilon(1e-8));
    scene.ego().state.v_x = 12.5 + 1e-9;
    CHECK(reward_components(scene, false, cfg).r_v == doctest::Approx(1.0).epsilon(1e-8));

    // Lane-center penalty.
    scene.ego().state.v_x = 12.5;
    scene.ego().state.y = 1.2;
    r = reward_components(scene, false, cfg);
    CHECK(r.r_c == -1.0);
    CHECK(r.total == 10.0 - 3.0);

    // Headway penalty: same-lane leader 15 m ahead (gap 10.5 < 18).
    scene.ego().state.y = 1.75;
    scene.vehicles.push_back(make_vehicle(115.0, 1.75, 12.5, VehicleRole::Manual, 12.5));
    r = reward_components(scene, false, cfg);
    CHECK(r.r_h == -1.0);

    // Equal speeds beyond the distance floor: no penalty.
    scene.vehicles[1].state.x = 130.0;
    r = reward_components(scene, false, cfg);
    CHECK(r.r_h == 0.0);

    // Fast closing far ahead: gap 45.5, closing 16.67 clears 2 s only if
    // the ratio stays above the floor; 45.5/4.17 is about 10.9 s.
    scene.vehicles[1].state.v_x = 8.33;
    scene.vehicles[1].state.x = 150.0;
    r = reward_components(scene, false, cfg);
    CHECK(r.r_h == 0.0);
    scene.vehicles[1].state.x = 112.0;
    r = reward_components(scene, false, cfg);
    CHECK(r.r_h == -1.0);
}

TEST_CASE("collision at the lane boundary scores the documented total") {
    auto scene = bare_scene({make_vehicle(100.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(102.0, -0.2, 5.0, VehicleRole::Manual, 5.0)});
    REQUIRE(check_collision(scene).has_value());
    const auto r = reward_components(scene, true, RewardConfig{});
    CHECK(r.r_s == -1.0);
    CHECK(r.r_v == 1.0);
    CHECK(r.r_c == 0.0);
    CHECK(r.r_h == 0.0);
    CHECK(r.total == -1990.0);
}

TEST_CASE("affordance extraction") {
    auto scene = bare_scene({make_vehicle(100.0, 1.75, 12.5, VehicleRole::Ego),
                             make_vehicle(154.5, -1.75, 5.56, VehicleRole::Manual, 5.56),
                             make_vehicle(120.0, 1.75, 16.0, VehicleRole::Manual, 16.0),
                             make_vehicle(80.0, 1.75, 10.0, VehicleRole::Manual, 10.0)});
    scene.prev_ego_a_x = -2.0;
    scene.ego().state.v_y = 1.8;
    const auto a = extract_affordances(scene);

    CHECK(a.d_fr == doctest::Approx(0.0).epsilon(1e-12));  // gap 50 ahead right
    CHECK(a.v_fr == doctest::Approx((5.56 - 12.5) / 16.67).epsilon(1e-12));
    CHECK(a.d_fl == doctest::Approx(2.0 * 15.5 / 100.0 - 1.0).epsilon(1e-12));
    CHECK(a.v_fl == doctest::Approx(3.5 / 16.67).epsilon(1e-12));
    CHECK(a.d_rl == doctest::Approx(2.0 * 15.5 / 100.0 - 1.0).epsilon(1e-12));
    CHECK(a.v_rl == doctest::Approx(-2.5 / 16.67).epsilon(1e-12));
    CHECK(a.d_rr == 1.0);  // empty quadrant
    CHECK(a.v_rr == 0.0);
    CHECK(a.y == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a.v_y == 1.0);
    CHECK(a.prev_a_x == -1.0);

    scene.ego().state.v_x = 16.67;
    CHECK(extract_affordances(scene).v_x == doctest::Approx(1.0).epsilon(1e-6));

    const auto vec = a.to_vector();
    REQUIRE(vec.size() == 12);
    CHECK(vec[0] == a.d_fr);
    CHECK(vec[8] == a.y);
}

TEST_CASE("affordances stay in range over random rollouts") {
    saferl::Rng rng(909);
    for (int episode = 0; episode < 12; ++episode) {
        auto scene = init_scene(RoadConfig{}, 4000 + episode);
        for (int i = 0; i < 400; ++i) {
            const auto a = extract_affordances(scene);
            for (double x : a.to_vector()) {
                REQUIRE(x >= -1.0);
                REQUIRE(x <= 1.0);
            }
            const auto action = static_cast<EgoAction>(rng.uniform_index(kActionCount));
            const auto out = step(scene, action, kDt);
            scene = out.next;
            if (out.terminal != Terminal::None) break;
        }
    }
}

TEST_CASE("uniform motion is energy free") {
    auto scene = bare_scene({make_vehicle(50.0, 1.75, 11.2, VehicleRole::Ego),
                             make_vehicle(200.0, -1.75, 5.56, VehicleRole::Manual, 5.56)});
    for (int i = 0; i < 50; ++i) {
        const auto out = step(scene, EgoAction::Maintain, kDt);
        scene = out.next;
        CHECK(scene.ego().state.v_x == 11.2);
    }
}

TEST_CASE("identical seeds reproduce identical trajectories") {
    auto run = [](std::uint64_t seed) {
        auto scene = init_scene(RoadConfig{}, seed);
        std::vector<double> trace;
        saferl::Rng rng(555);
        for (int i = 0; i < 200; ++i) {
            const auto action = static_cast<EgoAction>(rng.uniform_index(kActionCount));
            const auto out = step(scene, action, kDt);
            scene = out.next;
            for (const auto& v : scene.vehicles) {
                trace.push_back(v.state.x);
                trace.push_back(v.state.y);
                trace.push_back(v.state.v_x);
                trace.push_back(v.state.v_y);
            }
            trace.push_back(out.reward.total);
            if (out.terminal != Terminal::None) break;
        }
        return trace;
    };
    CHECK(run(42) == run(42));
    CHECK(run(42) != run(43));
}

TEST_CASE("scene serializes to a json line") {
    const auto scene = base_scene();
    const auto line = scene_jsonl(scene);
    CHECK(line.find("\"step\":0") != std::string::npos);
    CHECK(line.find("\"role\":\"ego\"") != std::string::npos);
    CHECK(line.find("\"role\":\"mv\"") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}
