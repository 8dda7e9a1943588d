#pragma once

#include "saferl/regret_model.hpp"
#include "saferl/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace saferl::calib {

struct DecisionRecord {
    regret::LaneChangeObservation obs;
    regret::LaneDecision label;
};

using Dataset = std::vector<DecisionRecord>;

struct FitConfig {
    double k = 3.0;             ///< initial link temperature, > 0
    double learning_rate = 0.5; ///< base step in log-parameter space
    int max_iterations = 400;
    int restarts = 8;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;    ///< stop when the NLL improvement drops below this

    void validate() const;
};

struct FitResult {
    regret::RegretParams params;
    double k = 0.0;             ///< fitted link temperature
    double nll = 0.0;
    double accuracy = 0.0;      ///< decision agreement of params on the training set
    int iterations = 0;         ///< iterations used by the winning restart
    int best_restart = 0;
    int diverged_runs = 0;
};

/// CSV with header v_s,v_c,v_f,v_b,d,decision and decision in {C,K}.
Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& data);

/// P(ChangeLane) = sigmoid(k * e_ck), clamped to [1e-12, 1 - 1e-12] so the
/// log-likelihood stays finite. Crosses 0.5 exactly where the decision rule
/// flips.
double choice_probability(const regret::LaneChangeObservation& obs,
                          const regret::RegretParams& params, double k);

/// Sum over records of -log P(label). Per-record terms are sorted before
/// summation so the value is independent of dataset row order.
double negative_log_likelihood(const Dataset& data, const regret::RegretParams& params,
                               double k);

/// Fraction of records whose modeled decision matches the label.
double evaluate_accuracy(const regret::RegretParams& params, const Dataset& data);

/// Maximum-likelihood fit of all seven model constants plus k. Parameters
/// live as exponentials of unconstrained values, so positivity is
/// structural. Full-batch descent on central-difference gradients
/// (step 1e-5 in log space) with per-iteration step halving; best of
/// `restarts` random initializations wins, ties by restart index.
FitResult fit(const Dataset& data, const FitConfig& config);

/// One observation uniform over v_s in [3,10], v_c in [3,10], v_f in [8,17],
/// v_b in [v_s,17], d in [0,60]. Five draws from the rng, in that order.
regret::LaneChangeObservation sample_observation(Rng& rng);

/// Observations from sample_observation; labels from decide(truth), then
/// flipped independently with probability flip_rate.
Dataset generate_synthetic_dataset(const regret::RegretParams& truth, int n,
                                   double flip_rate, std::uint64_t seed);

/// Flat JSON object holding the seven model constants plus k.
std::string params_to_json(const regret::RegretParams& params, double k);
std::pair<regret::RegretParams, double> params_from_json(const std::string& payload);

} // namespace saferl::calib
