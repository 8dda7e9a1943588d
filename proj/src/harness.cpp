#include "saferl/harness.hpp"

#include "saferl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace saferl::harness {

namespace fs = std::filesystem;

namespace {

// Substream indices off the master seed. The agent consumes 0..2 internally.
constexpr std::uint64_t kSceneStream = 3;
constexpr std::uint64_t kEvalStream = 4;

/// Shortest decimal form that parses back to the same double.
std::string fmt(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &pos);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (pos != value.size()) bad_value(key, value);
    return x;
}

int parse_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long long x = 0;
    try {
        x = std::stoll(value, &pos);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (pos != value.size() || x < INT_MIN || x > INT_MAX) bad_value(key, value);
    return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(value, &pos);
    } catch (const std::exception&) {
        bad_value(key, value);
    }
    if (pos != value.size() || (!value.empty() && value[0] == '-')) bad_value(key, value);
    return static_cast<std::uint64_t>(x);
}

bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    bad_value(key, value);
}

void apply_key(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "epochs") c.epochs = parse_int(key, value);
    else if (key == "max_steps") c.max_steps = parse_int(key, value);
    else if (key == "eval_period") c.eval_period = parse_int(key, value);
    else if (key == "eval_episodes") c.eval_episodes = parse_int(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "agent.gamma") c.agent.gamma = parse_double(key, value);
    else if (key == "agent.batch_size") c.agent.batch_size = parse_int(key, value);
    else if (key == "agent.learning_rate") c.agent.learning_rate = parse_double(key, value);
    else if (key == "agent.epsilon_start") c.agent.epsilon_start = parse_double(key, value);
    else if (key == "agent.epsilon_end") c.agent.epsilon_end = parse_double(key, value);
    else if (key == "agent.epsilon_decay_epochs") c.agent.epsilon_decay_epochs = parse_int(key, value);
    else if (key == "agent.target_sync_period") c.agent.target_sync_period = parse_int(key, value);
    else if (key == "agent.action_repeat") c.agent.action_repeat = parse_int(key, value);
    else if (key == "agent.collision_reward") c.agent.collision_reward = parse_double(key, value);
    else if (key == "agent.buffer_capacity") c.agent.buffer_capacity = parse_int(key, value);
    else if (key == "reward.w_s") c.reward.w_s = parse_double(key, value);
    else if (key == "reward.w_v") c.reward.w_v = parse_double(key, value);
    else if (key == "reward.w_c") c.reward.w_c = parse_double(key, value);
    else if (key == "reward.w_h") c.reward.w_h = parse_double(key, value);
    else if (key == "reward.v_min") c.reward.v_min = parse_double(key, value);
    else if (key == "reward.v_target") c.reward.v_target = parse_double(key, value);
    else if (key == "reward.v_max") c.reward.v_max = parse_double(key, value);
    else if (key == "reward.center_band") c.reward.center_band = parse_double(key, value);
    else if (key == "reward.safe_distance") c.reward.safe_distance = parse_double(key, value);
    else if (key == "reward.min_headway") c.reward.min_headway = parse_double(key, value);
    else if (key == "supervisor.enabled") c.supervisor.enabled = parse_flag(key, value);
    else if (key == "supervisor.t_pred") c.supervisor.t_pred = parse_double(key, value);
    else if (key == "supervisor.dt") c.supervisor.dt = parse_double(key, value);
    else if (key == "supervisor.lateral_bound") c.supervisor.lateral_bound = parse_double(key, value);
    else if (key == "supervisor.longitudinal_bound") c.supervisor.longitudinal_bound = parse_double(key, value);
    else if (key == "supervisor.offroad_bound") c.supervisor.offroad_bound = parse_double(key, value);
    else if (key == "mv.sigma1") c.mv.sigma1 = parse_double(key, value);
    else if (key == "mv.sigma2") c.mv.sigma2 = parse_double(key, value);
    else if (key == "mv.sigma3") c.mv.sigma3 = parse_double(key, value);
    else if (key == "mv.eta1") c.mv.eta1 = parse_double(key, value);
    else if (key == "mv.beta1") c.mv.beta1 = parse_double(key, value);
    else if (key == "mv.beta2") c.mv.beta2 = parse_double(key, value);
    else if (key == "mv.tau_s") c.mv.tau_s = parse_double(key, value);
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    return f;
}

/// Supervisor settings actually used in a run: the agent's collision reward
/// is the single source for the unsafe-experience reward.
safety::SupervisorConfig effective_supervisor(const TrainConfig& config) {
    safety::SupervisorConfig sup = config.supervisor;
    sup.collision_reward = config.agent.collision_reward;
    return sup;
}

sim::Scene fresh_scene(const TrainConfig& config, std::uint64_t seed) {
    sim::Scene scene = sim::init_scene(sim::RoadConfig{}, seed);
    scene.reward = config.reward;
    scene.mv_params = config.mv;
    scene.max_steps = config.max_steps;
    return scene;
}

struct ReturnStats {
    double mean = 0.0, stddev = 0.0, lo = 0.0, hi = 0.0;
};

ReturnStats return_stats(const std::vector<double>& xs) {
    ReturnStats s;
    if (xs.empty()) return s;
    s.lo = *std::min_element(xs.begin(), xs.end());
    s.hi = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

} // namespace

const std::vector<int>& net_dims() {
    static const std::vector<int> dims = {12, 64, 64, sim::kActionCount};
    return dims;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::domain_error("epochs must be >= 1");
    if (max_steps < 1) throw std::domain_error("max_steps must be >= 1");
    if (eval_period < 1) throw std::domain_error("eval_period must be >= 1");
    if (eval_episodes < 1) throw std::domain_error("eval_episodes must be >= 1");
    if (out_dir.empty()) throw std::domain_error("out_dir must not be empty");
    agent.validate();
    supervisor.validate();
    mv.validate();
}

std::string config_to_text(const TrainConfig& c) {
    std::ostringstream out;
    out << "# training run configuration\n";
    out << "\n";
    out << "# epochs: training episodes per run. 1200 is the default; longer\n";
    out << "# schedules such as 1500 are also in common use.\n";
    out << "epochs=" << c.epochs << "\n";
    out << "max_steps=" << c.max_steps << "\n";
    out << "eval_period=" << c.eval_period << "\n";
    out << "eval_episodes=" << c.eval_episodes << "\n";
    out << "seed=" << c.seed << "\n";
    out << "out_dir=" << c.out_dir << "\n";
    out << "\n";
    out << "agent.gamma=" << fmt(c.agent.gamma) << "\n";
    out << "agent.batch_size=" << c.agent.batch_size << "\n";
    out << "agent.learning_rate=" << fmt(c.agent.learning_rate) << "\n";
    out << "agent.epsilon_start=" << fmt(c.agent.epsilon_start) << "\n";
    out << "agent.epsilon_end=" << fmt(c.agent.epsilon_end) << "\n";
    out << "agent.epsilon_decay_epochs=" << c.agent.epsilon_decay_epochs << "\n";
    out << "agent.target_sync_period=" << c.agent.target_sync_period << "\n";
    out << "agent.action_repeat=" << c.agent.action_repeat << "\n";
    out << "agent.collision_reward=" << fmt(c.agent.collision_reward) << "\n";
    out << "agent.buffer_capacity=" << c.agent.buffer_capacity << "\n";
    out << "\n";
    out << "reward.w_s=" << fmt(c.reward.w_s) << "\n";
    out << "reward.w_v=" << fmt(c.reward.w_v) << "\n";
    out << "reward.w_c=" << fmt(c.reward.w_c) << "\n";
    out << "reward.w_h=" << fmt(c.reward.w_h) << "\n";
    out << "reward.v_min=" << fmt(c.reward.v_min) << "\n";
    out << "reward.v_target=" << fmt(c.reward.v_target) << "\n";
    out << "reward.v_max=" << fmt(c.reward.v_max) << "\n";
    out << "reward.center_band=" << fmt(c.reward.center_band) << "\n";
    out << "reward.safe_distance=" << fmt(c.reward.safe_distance) << "\n";
    out << "reward.min_headway=" << fmt(c.reward.min_headway) << "\n";
    out << "\n";
    out << "supervisor.enabled=" << (c.supervisor.enabled ? "on" : "off") << "\n";
    out << "supervisor.t_pred=" << fmt(c.supervisor.t_pred) << "\n";
    out << "supervisor.dt=" << fmt(c.supervisor.dt) << "\n";
    out << "supervisor.lateral_bound=" << fmt(c.supervisor.lateral_bound) << "\n";
    out << "supervisor.longitudinal_bound=" << fmt(c.supervisor.longitudinal_bound) << "\n";
    out << "supervisor.offroad_bound=" << fmt(c.supervisor.offroad_bound) << "\n";
    out << "\n";
    out << "mv.sigma1=" << fmt(c.mv.sigma1) << "\n";
    out << "mv.sigma2=" << fmt(c.mv.sigma2) << "\n";
    out << "mv.sigma3=" << fmt(c.mv.sigma3) << "\n";
    out << "mv.eta1=" << fmt(c.mv.eta1) << "\n";
    out << "mv.beta1=" << fmt(c.mv.beta1) << "\n";
    out << "mv.beta2=" << fmt(c.mv.beta2) << "\n";
    out << "mv.tau_s=" << fmt(c.mv.tau_s) << "\n";
    return out.str();
}

void save_config(const std::string& path, const TrainConfig& config) {
    auto f = open_out(path);
    f << config_to_text(config);
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    TrainConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     " is not key=value: '" + text + "'");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config: empty key on line " + std::to_string(line_no));
        }
        apply_key(config, key, value);
    }
    return config;
}

EvalSummary evaluate_policy(const nn::Mlp& net, const TrainConfig& config,
                            int episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::domain_error("evaluation needs at least one episode");
    const safety::SupervisorConfig sup = effective_supervisor(config);
    EvalSummary summary;
    summary.returns.reserve(static_cast<std::size_t>(episodes));
    for (int i = 0; i < episodes; ++i) {
        sim::Scene scene =
            fresh_scene(config, derive_seed(seed, 2 * static_cast<std::uint64_t>(i)));
        Rng action_rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
        double ret = 0.0;
        while (scene.terminal == sim::Terminal::None) {
            const sim::AffordanceVector s = sim::extract_affordances(scene);
            const sim::EgoAction proposed = rl::select_action(net, s, 0.0, action_rng);
            for (int r = 0; r < config.agent.action_repeat &&
                            scene.terminal == sim::Terminal::None;
                 ++r) {
                const auto result = safety::supervise(scene, proposed, config.mv, sup);
                auto outcome = sim::step(scene, result.executed, kDt);
                ret += outcome.reward.total;
                scene = std::move(outcome.next);
            }
        }
        if (scene.terminal == sim::Terminal::Collision) ++summary.collisions;
        summary.returns.push_back(ret);
    }
    const ReturnStats stats = return_stats(summary.returns);
    summary.mean_return = stats.mean;
    summary.std_return = stats.stddev;
    summary.min_return = stats.lo;
    summary.max_return = stats.hi;
    return summary;
}

RunSummary train(const TrainConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);

    RunSummary summary;
    summary.artifacts.training_csv = (dir / "training.csv").string();
    summary.artifacts.evaluation_csv = (dir / "evaluation.csv").string();
    summary.artifacts.veto_jsonl = (dir / "vetoes.jsonl").string();
    summary.artifacts.checkpoint_json = (dir / "checkpoint.json").string();
    summary.artifacts.checkpoint_meta_json = (dir / "checkpoint_meta.json").string();
    summary.artifacts.config_snapshot = (dir / "config.txt").string();

    save_config(summary.artifacts.config_snapshot, config);
    auto train_csv = open_out(summary.artifacts.training_csv);
    auto eval_csv = open_out(summary.artifacts.evaluation_csv);
    auto veto_log = open_out(summary.artifacts.veto_jsonl);
    train_csv << "epoch,return,steps,terminal,vetoes,epsilon\n";
    eval_csv << "epoch,mean_return,collisions\n";

    rl::Agent agent(config.agent, net_dims(), config.seed);
    const safety::SupervisorConfig sup = effective_supervisor(config);
    const std::uint64_t scene_base = derive_seed(config.seed, kSceneStream);
    const std::uint64_t eval_base = derive_seed(config.seed, kEvalStream);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        sim::Scene scene =
            fresh_scene(config, derive_seed(scene_base, static_cast<std::uint64_t>(epoch)));
        const double epsilon = rl::epsilon_at(epoch, config.agent);
        double ret = 0.0;
        int vetoes = 0;
        while (scene.terminal == sim::Terminal::None) {
            const sim::AffordanceVector s = sim::extract_affordances(scene);
            const sim::EgoAction proposed = agent.act(s, epsilon);
            for (int r = 0; r < config.agent.action_repeat &&
                            scene.terminal == sim::Terminal::None;
                 ++r) {
                const auto result = safety::supervise(scene, proposed, config.mv, sup);
                if (result.veto) {
                    ++vetoes;
                    ++summary.total_vetoes;
                    nlohmann::json entry;
                    entry["epoch"] = epoch;
                    entry["step"] = scene.step_count;
                    entry["original"] = sim::action_name(result.veto->original);
                    entry["verdict"] = safety::verdict_kind_name(result.veto->verdict.kind);
                    entry["replacement"] = sim::action_name(result.executed);
                    veto_log << entry.dump() << "\n";
                    agent.store_experience(*result.unsafe_experience);
                    ++summary.stored_experiences;
                }
                const sim::AffordanceVector before = sim::extract_affordances(scene);
                auto outcome = sim::step(scene, result.executed, kDt);
                ret += outcome.reward.total;
                rl::Experience exp;
                exp.s = before;
                exp.a = result.executed;
                if (outcome.terminal == sim::Terminal::None) {
                    exp.next = sim::extract_affordances(outcome.next);
                    exp.r = outcome.reward.total;
                } else if (outcome.terminal == sim::Terminal::Collision) {
                    exp.r = config.agent.collision_reward;
                } else {
                    exp.r = outcome.reward.total;
                }
                agent.store_experience(std::move(exp));
                ++summary.stored_experiences;
                ++summary.executed_steps;
                if (const auto loss = agent.train_step();
                    loss && !std::isfinite(*loss)) {
                    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch));
                }
                scene = std::move(outcome.next);
            }
        }
        if (scene.terminal == sim::Terminal::Collision) ++summary.collision_epochs;
        summary.episodes.push_back(
            {epoch, ret, scene.step_count, scene.terminal, vetoes, epsilon});
        summary.final_epsilon = epsilon;
        train_csv << epoch << ',' << fmt(ret) << ',' << scene.step_count << ','
                  << sim::terminal_name(scene.terminal) << ',' << vetoes << ','
                  << fmt(epsilon) << "\n";

        if ((epoch + 1) % config.eval_period == 0) {
            const EvalSummary ev =
                evaluate_policy(agent.online(), config, config.eval_episodes,
                                derive_seed(eval_base, static_cast<std::uint64_t>(epoch)));
            summary.evals.push_back({epoch, ev.mean_return, ev.std_return, ev.min_return,
                                     ev.max_return, ev.collisions});
            eval_csv << epoch << ',' << fmt(ev.mean_return) << ',' << ev.collisions << "\n";
        }
    }

    {
        auto checkpoint = open_out(summary.artifacts.checkpoint_json);
        checkpoint << nn::serialize(agent.online());
    }
    {
        nlohmann::json meta;
        meta["epochs"] = config.epochs;
        meta["gradient_steps"] = agent.gradient_steps();
        meta["final_epsilon"] = summary.final_epsilon;
        meta["master_seed"] = config.seed;
        meta["supervisor_enabled"] = config.supervisor.enabled;
        auto f = open_out(summary.artifacts.checkpoint_meta_json);
        f << meta.dump(2) << "\n";
    }
    return summary;
}

nn::Mlp load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return nn::deserialize(buf.str());
}

ComparisonResult compare(const TrainConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);

    TrainConfig supervised = config;
    supervised.supervisor.enabled = true;
    supervised.out_dir = (dir / "supervised").string();
    TrainConfig unsupervised = config;
    unsupervised.supervisor.enabled = false;
    unsupervised.out_dir = (dir / "unsupervised").string();

    ComparisonResult result;
    result.supervised = train(supervised);
    result.unsupervised = train(unsupervised);
    result.csv_path = (dir / "comparison.csv").string();

    auto csv = open_out(result.csv_path);
    csv << "arm,epochs,collision_epochs,collision_ratio,total_vetoes\n";
    const auto row = [&](const char* arm, const RunSummary& run) {
        const double ratio = static_cast<double>(run.collision_epochs) /
                             static_cast<double>(config.epochs);
        csv << arm << ',' << config.epochs << ',' << run.collision_epochs << ','
            << fmt(ratio) << ',' << run.total_vetoes << "\n";
    };
    row("supervised", result.supervised);
    row("unsupervised", result.unsupervised);
    return result;
}

std::string comparison_table(const ComparisonResult& result) {
    const auto line = [](const char* arm, const RunSummary& run, int epochs) {
        const double ratio =
            100.0 * static_cast<double>(run.collision_epochs) / static_cast<double>(epochs);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-12s %8d %12d %10.2f%% %12lld\n", arm, epochs,
                      run.collision_epochs, ratio, run.total_vetoes);
        return std::string(buf);
    };
    const int epochs = static_cast<int>(result.supervised.episodes.size());
    std::string table = "arm            epochs   collisions      ratio        vetoes\n";
    table += line("supervised", result.supervised, epochs);
    table += line("unsupervised", result.unsupervised,
                  static_cast<int>(result.unsupervised.episodes.size()));
    return table;
}

CalibrationReport calibrate(const std::string& dataset_path,
                            const calib::FitConfig& fit_config,
                            const std::string& out_json) {
    const calib::Dataset data = calib::load_dataset(dataset_path);
    CalibrationReport report;
    report.result = calib::fit(data, fit_config);
    report.json_path = out_json;
    auto f = open_out(out_json);
    f << calib::params_to_json(report.result.params, report.result.k) << "\n";
    return report;
}

int elicit(int count, std::uint64_t seed, const std::string& out_path,
           std::istream& in, std::ostream& out) {
    if (count < 1) throw std::domain_error("elicit needs at least one scenario");
    Rng rng(seed);
    calib::Dataset records;
    for (int i = 0; i < count; ++i) {
        const regret::LaneChangeObservation obs = calib::sample_observation(rng);
        char prompt[240];
        std::snprintf(prompt, sizeof(prompt),
                      "%d/%d: you %.1f m/s behind a %.1f m/s leader (your preferred "
                      "speed %.1f m/s); target-lane car %.1f m/s, %.1f m back. "
                      "change or keep? [C/K] ",
                      i + 1, count, obs.v_c(), obs.v_s(), obs.v_b(), obs.v_f(), obs.d());
        out << prompt << std::flush;
        std::string line;
        bool answered = false;
        while (std::getline(in, line)) {
            const std::string answer = trim(line);
            if (answer == "C" || answer == "c") {
                records.push_back({obs, regret::LaneDecision::ChangeLane});
                answered = true;
                break;
            }
            if (answer == "K" || answer == "k") {
                records.push_back({obs, regret::LaneDecision::KeepLane});
                answered = true;
                break;
            }
            out << "answer C or K: " << std::flush;
        }
        if (!answered) break; // input exhausted; keep what was collected
    }
    calib::save_dataset(out_path, records);
    out << "wrote " << records.size() << " records to " << out_path << "\n";
    return static_cast<int>(records.size());
}

} // namespace saferl::harness
