#include "saferl/calibration.hpp"

#include "saferl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace saferl::calib {

namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_prob(double p) {
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

[[noreturn]] void fail_row(const char* kind, std::size_t line, const std::string& why) {
    std::ostringstream os;
    os << kind << " at line " << line << ": " << why;
    throw std::runtime_error(os.str());
}

// The eight optimized quantities, each stored as its logarithm.
using RawVec = std::array<double, 8>;

regret::RegretParams raw_params(const RawVec& raw) {
    regret::RegretParams p;
    p.sigma1 = std::exp(raw[0]);
    p.sigma2 = std::exp(raw[1]);
    p.sigma3 = std::exp(raw[2]);
    p.eta1 = std::exp(raw[3]);
    p.beta1 = std::exp(raw[4]);
    p.beta2 = std::exp(raw[5]);
    p.tau_s = std::exp(raw[6]);
    return p;
}

double raw_nll(const Dataset& data, const RawVec& raw) {
    return negative_log_likelihood(data, raw_params(raw), std::exp(raw[7]));
}

struct RestartOutcome {
    RawVec raw{};
    double nll = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool diverged = false;
};

RestartOutcome run_restart(const Dataset& data, const FitConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    constexpr double kGradStep = 1e-5;
    // Log-uniform initial windows wide enough to cover driver-model scales.
    const std::array<std::pair<double, double>, 7> windows = {{
        {0.5, 30.0},   // sigma1
        {0.02, 1.0},   // sigma2
        {0.05, 5.0},   // sigma3
        {5.0, 600.0},  // eta1
        {0.5, 30.0},   // beta1
        {0.5, 6.0},    // beta2
        {1.0, 8.0},    // tau_s
    }};
    RestartOutcome out;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out.raw[i] = rng.uniform(std::log(windows[i].first), std::log(windows[i].second));
    }
    out.raw[7] = rng.uniform(std::log(cfg.k / 4.0), std::log(cfg.k * 4.0));

    double cur = raw_nll(data, out.raw);
    if (!std::isfinite(cur)) {
        out.diverged = true;
        return out;
    }
    for (int it = 0; it < cfg.max_iterations; ++it) {
        out.iterations = it + 1;
        RawVec grad{};
        bool grad_ok = true;
        for (std::size_t j = 0; j < grad.size(); ++j) {
            RawVec probe = out.raw;
            probe[j] = out.raw[j] + kGradStep;
            const double up = raw_nll(data, probe);
            probe[j] = out.raw[j] - kGradStep;
            const double down = raw_nll(data, probe);
            grad[j] = (up - down) / (2.0 * kGradStep);
            if (!std::isfinite(grad[j])) grad_ok = false;
        }
        if (!grad_ok) {
            out.diverged = true;
            return out;
        }
        // Descend along -grad; halve the step until the NLL improves.
        double step = cfg.learning_rate;
        double next = std::numeric_limits<double>::infinity();
        RawVec candidate{};
        bool moved = false;
        for (int halving = 0; halving < 30; ++halving) {
            for (std::size_t j = 0; j < candidate.size(); ++j) {
                candidate[j] = out.raw[j] - step * grad[j];
            }
            next = raw_nll(data, candidate);
            if (std::isfinite(next) && next < cur) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        const double gain = cur - next;
        out.raw = candidate;
        cur = next;
        if (gain < cfg.tolerance) break;
    }
    out.nll = cur;
    return out;
}

} // namespace

void FitConfig::validate() const {
    if (!(k > 0.0)) throw std::invalid_argument("initial k must be > 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be > 0");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "v_s,v_c,v_f,v_b,d,decision") {
        throw std::runtime_error("unexpected dataset header: " + line);
    }
    Dataset data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 6> fields;
        std::size_t field = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field >= fields.size()) fail_row("parse error", line_no, "too many fields");
                fields[field++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (field != fields.size()) fail_row("parse error", line_no, "expected 6 fields");
        std::array<double, 5> nums{};
        for (std::size_t i = 0; i < nums.size(); ++i) {
            try {
                std::size_t used = 0;
                nums[i] = std::stod(fields[i], &used);
                if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
            } catch (const std::exception&) {
                fail_row("parse error", line_no, "bad number '" + fields[i] + "'");
            }
        }
        regret::LaneDecision label;
        if (fields[5] == "C") {
            label = regret::LaneDecision::ChangeLane;
        } else if (fields[5] == "K") {
            label = regret::LaneDecision::KeepLane;
        } else {
            fail_row("parse error", line_no, "decision must be C or K, got '" + fields[5] + "'");
        }
        try {
            data.push_back({regret::LaneChangeObservation(nums[0], nums[1], nums[2], nums[3], nums[4]),
                            label});
        } catch (const std::exception& e) {
            fail_row("validation error", line_no, e.what());
        }
    }
    return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << "v_s,v_c,v_f,v_b,d,decision\n";
    out.precision(17);
    for (const auto& rec : data) {
        out << rec.obs.v_s() << ',' << rec.obs.v_c() << ',' << rec.obs.v_f() << ','
            << rec.obs.v_b() << ',' << rec.obs.d() << ','
            << (rec.label == regret::LaneDecision::ChangeLane ? 'C' : 'K') << '\n';
    }
}

double choice_probability(const regret::LaneChangeObservation& obs,
                          const regret::RegretParams& params, double k) {
    return clamp_prob(sigmoid(k * regret::net_advantage(obs, params).e_ck));
}

double negative_log_likelihood(const Dataset& data, const regret::RegretParams& params,
                               double k) {
    if (data.empty()) throw std::domain_error("dataset must be nonempty");
    std::vector<double> terms;
    terms.reserve(data.size());
    for (const auto& rec : data) {
        const double p_change = choice_probability(rec.obs, params, k);
        const double p_label =
            rec.label == regret::LaneDecision::ChangeLane ? p_change : 1.0 - p_change;
        terms.push_back(-std::log(clamp_prob(p_label)));
    }
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

double evaluate_accuracy(const regret::RegretParams& params, const Dataset& data) {
    if (data.empty()) throw std::domain_error("dataset must be nonempty");
    std::size_t hits = 0;
    for (const auto& rec : data) {
        if (regret::decide(rec.obs, params) == rec.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

FitResult fit(const Dataset& data, const FitConfig& config) {
    config.validate();
    if (data.empty()) throw std::domain_error("dataset must be nonempty");

    FitResult best;
    best.nll = std::numeric_limits<double>::infinity();
    bool found = false;
    int completed = 0;
    int diverged = 0;
    std::uint64_t stream = 0;
    const int attempt_cap = config.restarts * 3;
    while (completed < config.restarts && static_cast<int>(stream) < attempt_cap) {
        const auto outcome = run_restart(data, config, derive_seed(config.seed, stream));
        ++stream;
        if (outcome.diverged) {
            ++diverged;
            continue;
        }
        if (!found || outcome.nll < best.nll) {
            found = true;
            best.params = raw_params(outcome.raw);
            best.k = std::exp(outcome.raw[7]);
            best.nll = outcome.nll;
            best.iterations = outcome.iterations;
            best.best_restart = completed;
        }
        ++completed;
    }
    if (!found) throw std::runtime_error("all fit restarts diverged");
    best.accuracy = evaluate_accuracy(best.params, data);
    best.diverged_runs = diverged;
    return best;
}

regret::LaneChangeObservation sample_observation(Rng& rng) {
    const double v_s = rng.uniform(3.0, 10.0);
    const double v_c = rng.uniform(3.0, 10.0);
    const double v_f = rng.uniform(8.0, 17.0);
    const double v_b = rng.uniform(v_s, 17.0);
    const double d = rng.uniform(0.0, 60.0);
    return regret::LaneChangeObservation(v_s, v_c, v_f, v_b, d);
}

Dataset generate_synthetic_dataset(const regret::RegretParams& truth, int n,
                                   double flip_rate, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("n must be > 0");
    Rng rng(seed);
    Dataset data;
    data.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const regret::LaneChangeObservation obs = sample_observation(rng);
        auto label = regret::decide(obs, truth);
        if (rng.uniform() < flip_rate) {
            label = label == regret::LaneDecision::ChangeLane ? regret::LaneDecision::KeepLane
                                                              : regret::LaneDecision::ChangeLane;
        }
        data.push_back({obs, label});
    }
    return data;
}

std::string params_to_json(const regret::RegretParams& params, double k) {
    nlohmann::json j;
    j["sigma1"] = params.sigma1;
    j["sigma2"] = params.sigma2;
    j["sigma3"] = params.sigma3;
    j["eta1"] = params.eta1;
    j["beta1"] = params.beta1;
    j["beta2"] = params.beta2;
    j["tau_s"] = params.tau_s;
    j["k"] = k;
    return j.dump(2);
}

std::pair<regret::RegretParams, double> params_from_json(const std::string& payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed parameter payload");
    }
    regret::RegretParams p;
    double k = 0.0;
    try {
        j.at("sigma1").get_to(p.sigma1);
        j.at("sigma2").get_to(p.sigma2);
        j.at("sigma3").get_to(p.sigma3);
        j.at("eta1").get_to(p.eta1);
        j.at("beta1").get_to(p.beta1);
        j.at("beta2").get_to(p.beta2);
        j.at("tau_s").get_to(p.tau_s);
        j.at("k").get_to(k);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed parameter payload");
    }
    p.validate();
    return {p, k};
}

} // namespace saferl::calib
