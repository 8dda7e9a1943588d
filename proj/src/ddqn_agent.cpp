#include "saferl/ddqn_agent.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace saferl::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::domain_error("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Experience e) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(e));
        return;
    }
    items_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw std::out_of_range("replay index out of range");
    if (items_.size() < capacity_) return items_[i];
    return items_[(head_ + i) % capacity_];
}

void AgentConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::domain_error("gamma must lie in (0,1)");
    if (batch_size < 1) throw std::domain_error("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::domain_error("learning_rate must be positive");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
        !(epsilon_end >= 0.0 && epsilon_end <= 1.0) || epsilon_end > epsilon_start)
        throw std::domain_error("epsilon schedule must satisfy 0 <= end <= start <= 1");
    if (epsilon_decay_epochs < 1) throw std::domain_error("epsilon_decay_epochs must be positive");
    if (target_sync_period < 1) throw std::domain_error("target_sync_period must be positive");
    if (action_repeat < 1) throw std::domain_error("action_repeat must be positive");
    if (buffer_capacity < batch_size)
        throw std::domain_error("buffer_capacity must hold at least one batch");
}

double epsilon_at(int epoch, const AgentConfig& config) {
    if (epoch < 0) throw std::domain_error("epoch must be nonnegative");
    const double progress =
        std::min(static_cast<double>(epoch) / config.epsilon_decay_epochs, 1.0);
    return config.epsilon_start - (config.epsilon_start - config.epsilon_end) * progress;
}

namespace {

std::size_t greedy_index(const std::vector<double>& q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = i;
    return best;
}

} // namespace

sim::EgoAction select_action(const nn::Mlp& net, const sim::AffordanceVector& s,
                             double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::domain_error("epsilon must lie in [0,1]");
    if (rng.uniform() < epsilon)
        return static_cast<sim::EgoAction>(rng.uniform_index(sim::kActionCount));
    const std::vector<double> q = nn::forward(net, s.to_vector());
    return static_cast<sim::EgoAction>(greedy_index(q));
}

std::vector<Experience> sample_minibatch(const ReplayBuffer& buffer, std::size_t k,
                                         Rng& rng) {
    if (buffer.size() < k) throw std::logic_error("replay buffer holds less than one batch");
    std::vector<Experience> batch;
    batch.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        batch.push_back(buffer.at(rng.uniform_index(buffer.size())));
    return batch;
}

std::vector<double> ddqn_targets(const std::vector<Experience>& batch,
                                 const nn::Mlp& online, const nn::Mlp& target,
                                 double gamma) {
    std::vector<double> ys;
    ys.reserve(batch.size());
    for (const Experience& e : batch) {
        if (!e.next) {
            ys.push_back(e.r);
            continue;
        }
        const std::vector<double> x = e.next->to_vector();
        const std::size_t best = greedy_index(nn::forward(online, x));
        ys.push_back(e.r + gamma * nn::forward(target, x)[best]);
    }
    return ys;
}

Agent::Agent(AgentConfig config, const std::vector<int>& dims, std::uint64_t seed)
    : Agent(std::move(config), nn::mlp_init(dims, derive_seed(seed, 0)), seed) {}

Agent::Agent(AgentConfig config, nn::Mlp online, std::uint64_t seed)
    : config_(std::move(config)),
      online_(std::move(online)),
      target_(online_),
      adam_(nn::AdamState::for_net(online_, config_.learning_rate)),
      buffer_(config_.buffer_capacity),
      action_rng_(derive_seed(seed, 1)),
      sample_rng_(derive_seed(seed, 2)) {
    config_.validate();
}

sim::EgoAction Agent::act(const sim::AffordanceVector& s, double epsilon) {
    return select_action(online_, s, epsilon, action_rng_);
}

void Agent::store_experience(Experience e) { buffer_.push(std::move(e)); }

std::optional<double> Agent::train_step() {
    if (buffer_.size() < config_.batch_size) return std::nullopt;
    const std::vector<Experience> batch =
        sample_minibatch(buffer_, config_.batch_size, sample_rng_);
    const std::vector<double> targets = ddqn_targets(batch, online_, target_, config_.gamma);

    std::vector<nn::BatchItem> items(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        items[i].x = batch[i].s.to_vector();
        items[i].action = static_cast<int>(batch[i].a);
        items[i].target = targets[i];
    }
    const nn::GradBundle grads = nn::loss_and_grads(online_, items);
    nn::adam_step(online_, adam_, grads);
    ++gradient_steps_;
    if (gradient_steps_ % static_cast<std::size_t>(config_.target_sync_period) == 0)
        sync_target();
    return grads.loss;
}

void Agent::sync_target() { target_ = online_; }

} // namespace saferl::rl
