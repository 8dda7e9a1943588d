#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "saferl/highway_sim.hpp"
#include "saferl/neural.hpp"
#include "saferl/rng.hpp"

namespace saferl::rl {

/// One transition. An empty `next` marks a terminal (or vetoed) experience:
/// its target is the raw reward, never bootstrapped.
struct Experience {
    sim::AffordanceVector s;
    sim::EgoAction a = sim::EgoAction::Maintain;
    std::optional<sim::AffordanceVector> next;
    double r = 0.0;
};

/// Fixed-capacity ring. Once full, each push evicts the oldest item.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Experience e);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// Indexed oldest-first.
    const Experience& at(std::size_t i) const;

  private:
    std::vector<Experience> items_;
    std::size_t capacity_;
    std::size_t head_ = 0;
};

struct AgentConfig {
    double gamma = 0.99;
    std::size_t batch_size = 256;
    double learning_rate = 1e-4;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_epochs = 1000;
    /// Gradient steps between target-network copies.
    int target_sync_period = 100;
    int action_repeat = 2;
    double collision_reward = -2000.0;
    std::size_t buffer_capacity = 100000;

    void validate() const;
};

/// Linear anneal from epsilon_start to epsilon_end over the first
/// epsilon_decay_epochs epochs, constant afterwards.
double epsilon_at(int epoch, const AgentConfig& config);

/// With probability epsilon a uniform action, otherwise the greedy argmax
/// of the network's Q values; ties go to the lowest action index. Exactly
/// one branch draw is consumed, plus one more when exploring.
sim::EgoAction select_action(const nn::Mlp& net, const sim::AffordanceVector& s,
                             double epsilon, Rng& rng);

/// Uniform sampling with replacement. Requires buffer.size() >= k.
std::vector<Experience> sample_minibatch(const ReplayBuffer& buffer, std::size_t k,
                                         Rng& rng);

/// y = r + gamma * Q_target(s', argmax_a Q_online(s', a)) for transitions
/// with a next state, y = r for terminal ones.
std::vector<double> ddqn_targets(const std::vector<Experience>& batch,
                                 const nn::Mlp& online, const nn::Mlp& target,
                                 double gamma);

/// Owns the online/target pair, the replay buffer, and the rng streams for
/// exploration and sampling. The target net starts as a copy of the online
/// net and is refreshed every target_sync_period gradient steps.
class Agent {
  public:
    /// Fresh Glorot-initialised nets of the given layer sizes.
    Agent(AgentConfig config, const std::vector<int>& dims, std::uint64_t seed);
    /// Adopts a prepared online net (target becomes a copy).
    Agent(AgentConfig config, nn::Mlp online, std::uint64_t seed);

    sim::EgoAction act(const sim::AffordanceVector& s, double epsilon);
    void store_experience(Experience e);

    /// One minibatch update. Empty until the buffer holds a full batch.
    std::optional<double> train_step();
    void sync_target();

    const nn::Mlp& online() const { return online_; }
    nn::Mlp& online() { return online_; }
    const nn::Mlp& target() const { return target_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    std::size_t gradient_steps() const { return gradient_steps_; }
    const AgentConfig& config() const { return config_; }

  private:
    AgentConfig config_;
    nn::Mlp online_;
    nn::Mlp target_;
    nn::AdamState adam_;
    ReplayBuffer buffer_;
    std::size_t gradient_steps_ = 0;
    Rng action_rng_;
    Rng sample_rng_;
};

} // namespace saferl::rl
