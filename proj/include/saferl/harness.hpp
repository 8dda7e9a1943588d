#pragma once

#include "saferl/calibration.hpp"
#include "saferl/ddqn_agent.hpp"
#include "saferl/highway_sim.hpp"
#include "saferl/neural.hpp"
#include "saferl/regret_model.hpp"
#include "saferl/safety_supervisor.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace saferl::harness {

/// Simulation tick shared by training and evaluation rollouts.
inline constexpr double kDt = 0.1;

/// Q-network layer sizes: twelve affordances in, one value per action out.
const std::vector<int>& net_dims();

struct TrainConfig {
    int epochs = 1200;
    int max_steps = 600;     ///< per-episode step cap
    int eval_period = 50;    ///< greedy evaluation after every this many epochs
    int eval_episodes = 5;   ///< rollouts per evaluation point
    std::uint64_t seed = 0;  ///< master seed; every stream derives from it
    std::string out_dir = "run";

    rl::AgentConfig agent;
    sim::RewardConfig reward;
    safety::SupervisorConfig supervisor;
    regret::RegretParams mv; ///< driver profile of the manual vehicles

    void validate() const;
};

/// Flat key=value text, full-line # comments allowed. Missing keys keep
/// their defaults; unknown keys are an error. save/load round-trips exactly.
TrainConfig load_config(const std::string& path);
std::string config_to_text(const TrainConfig& config);
void save_config(const std::string& path, const TrainConfig& config);

struct EpisodeLog {
    int epoch = 0;
    double total_reward = 0.0; ///< sum of per-step reward totals
    int steps = 0;
    sim::Terminal terminal = sim::Terminal::None;
    int vetoes = 0;
    double epsilon = 0.0;
};

struct EvalPoint {
    int epoch = 0; ///< index of the epoch after which the evaluation ran
    double mean_return = 0.0;
    double std_return = 0.0;
    double min_return = 0.0;
    double max_return = 0.0;
    int collisions = 0;
};

struct RunArtifacts {
    std::string training_csv;
    std::string evaluation_csv;
    std::string veto_jsonl;
    std::string checkpoint_json;
    std::string checkpoint_meta_json;
    std::string config_snapshot;
};

struct RunSummary {
    std::vector<EpisodeLog> episodes;
    std::vector<EvalPoint> evals;
    long long executed_steps = 0;
    long long stored_experiences = 0; ///< always executed_steps + total_vetoes
    long long total_vetoes = 0;
    int collision_epochs = 0;
    double final_epsilon = 0.0;
    RunArtifacts artifacts;
};

/// Full training run. Writes training.csv (one row per epoch), evaluation.csv
/// (one row per evaluation point), vetoes.jsonl (one object per veto),
/// checkpoint.json + checkpoint_meta.json, and config.txt into out_dir.
/// Identical config implies byte-identical artifacts. A non-finite loss
/// aborts with a runtime_error naming the epoch.
RunSummary train(const TrainConfig& config);

struct EvalSummary {
    std::vector<double> returns;
    double mean_return = 0.0;
    double std_return = 0.0; ///< sample standard deviation, 0 for one episode
    double min_return = 0.0;
    double max_return = 0.0;
    int collisions = 0;
};

/// Greedy rollouts of `net` under the config's reward, supervisor, and MV
/// settings. No exploration, no learning. Episode i runs on scene seed
/// derive(seed, 2i) with tie-break rng derive(seed, 2i+1).
EvalSummary evaluate_policy(const nn::Mlp& net, const TrainConfig& config,
                            int episodes, std::uint64_t seed);

/// Reads a checkpoint.json written by train().
nn::Mlp load_checkpoint(const std::string& path);

struct ComparisonResult {
    RunSummary supervised;
    RunSummary unsupervised;
    std::string csv_path;
};

/// Two training runs from the same master seed, supervisor on and off, into
/// out_dir/supervised and out_dir/unsupervised, plus comparison.csv.
ComparisonResult compare(const TrainConfig& config);
std::string comparison_table(const ComparisonResult& result);

struct CalibrationReport {
    calib::FitResult result;
    std::string json_path;
};

/// Fits driver-model constants to a labeled decision CSV and writes them as
/// JSON.
CalibrationReport calibrate(const std::string& dataset_path,
                            const calib::FitConfig& fit_config,
                            const std::string& out_json);

/// Interactive dataset collection: presents `count` sampled scenarios one
/// line at a time, accepts C or K (case-insensitive), re-prompts on anything
/// else, and writes the answered records to out_path on EOF or completion.
/// Returns the number of records written.
int elicit(int count, std::uint64_t seed, const std::string& out_path,
           std::istream& in, std::ostream& out);

} // namespace saferl::harness
