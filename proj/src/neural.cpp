#include "saferl/neural.hpp"

#include "saferl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saferl::nn {

namespace {

void check_shapes(const Mlp& net) {
    if (net.dims.size() < 2) throw std::invalid_argument("network needs at least 2 dims");
    if (net.weights.size() != net.dims.size() - 1 || net.biases.size() != net.dims.size() - 1) {
        throw std::invalid_argument("layer count mismatch");
    }
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto rows = static_cast<std::size_t>(net.dims[l + 1]);
        const auto cols = static_cast<std::size_t>(net.dims[l]);
        if (net.weights[l].size() != rows * cols || net.biases[l].size() != rows) {
            throw std::invalid_argument("parameter shape mismatch");
        }
    }
}

/// Row-major (rows x cols) matrix times each batch row; out is batch x rows.
void affine_batch(const std::vector<double>& w, const std::vector<double>& b,
                  const std::vector<double>& in, std::size_t batch,
                  std::size_t cols, std::size_t rows, std::vector<double>& out) {
    out.assign(batch * rows, 0.0);
    for (std::size_t j = 0; j < batch; ++j) {
        const double* xj = in.data() + j * cols;
        double* oj = out.data() + j * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* wr = w.data() + r * cols;
            double acc = b[r];
            for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xj[c];
            oj[r] = acc;
        }
    }
}

} // namespace

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

AdamState AdamState::for_net(const Mlp& net, double alpha) {
    AdamState st;
    st.alpha = alpha;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        st.m_weights.emplace_back(net.weights[l].size(), 0.0);
        st.v_weights.emplace_back(net.weights[l].size(), 0.0);
        st.m_biases.emplace_back(net.biases[l].size(), 0.0);
        st.v_biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return st;
}

Mlp mlp_init(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("network needs at least 2 dims");
    for (int d : dims) {
        if (d <= 0) throw std::invalid_argument("layer dims must be positive");
    }
    Mlp net;
    net.dims = dims;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = static_cast<double>(dims[l]);
        const auto fan_out = static_cast<double>(dims[l + 1]);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(dims[l]) * dims[l + 1]);
        for (double& v : w) v = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(static_cast<std::size_t>(dims[l + 1]), 0.0);
    }
    return net;
}

std::vector<double> forward(const Mlp& net, const std::vector<double>& x) {
    check_shapes(net);
    if (x.size() != static_cast<std::size_t>(net.dims.front())) {
        throw std::invalid_argument("input length does not match network");
    }
    std::vector<double> cur = x;
    std::vector<double> next;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto rows = static_cast<std::size_t>(net.dims[l + 1]);
        const auto cols = static_cast<std::size_t>(net.dims[l]);
        affine_batch(net.weights[l], net.biases[l], cur, 1, cols, rows, next);
        if (l + 1 < net.weights.size()) {
            for (double& v : next) v = std::max(v, 0.0);
        }
        cur.swap(next);
    }
    return cur;
}

double batch_loss(const Mlp& net, const std::vector<BatchItem>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double acc = 0.0;
    for (const auto& item : batch) {
        const auto out = forward(net, item.x);
        if (item.action < 0 || static_cast<std::size_t>(item.action) >= out.size()) {
            throw std::invalid_argument("action index out of range");
        }
        const double diff = item.target - out[static_cast<std::size_t>(item.action)];
        acc += 0.5 * diff * diff;
    }
    return acc / static_cast<double>(batch.size());
}

GradBundle loss_and_grads(const Mlp& net, const std::vector<BatchItem>& batch) {
    check_shapes(net);
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const std::size_t B = batch.size();
    const std::size_t L = net.weights.size();
    const auto in_dim = static_cast<std::size_t>(net.dims.front());
    const auto out_dim = static_cast<std::size_t>(net.dims.back());

    // activations[0] is the input block; activations[l+1] follows layer l.
    std::vector<std::vector<double>> activations(L + 1);
    activations[0].resize(B * in_dim);
    for (std::size_t j = 0; j < B; ++j) {
        if (batch[j].x.size() != in_dim) throw std::invalid_argument("input length mismatch");
        std::copy(batch[j].x.begin(), batch[j].x.end(), activations[0].begin() + j * in_dim);
    }
    for (std::size_t l = 0; l < L; ++l) {
        const auto rows = static_cast<std::size_t>(net.dims[l + 1]);
        const auto cols = static_cast<std::size_t>(net.dims[l]);
        affine_batch(net.weights[l], net.biases[l], activations[l], B, cols, rows, activations[l + 1]);
        if (l + 1 < L) {
            for (double& v : activations[l + 1]) v = std::max(v, 0.0);
        }
    }

    GradBundle g;
    g.d_weights.resize(L);
    g.d_biases.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        g.d_weights[l].assign(net.weights[l].size(), 0.0);
        g.d_biases[l].assign(net.biases[l].size(), 0.0);
    }

    std::vector<double> delta(B * out_dim, 0.0);
    double loss = 0.0;
    for (std::size_t j = 0; j < B; ++j) {
        const int a = batch[j].action;
        if (a < 0 || static_cast<std::size_t>(a) >= out_dim) {
            throw std::invalid_argument("action index out of range");
        }
        const double q = activations[L][j * out_dim + static_cast<std::size_t>(a)];
        const double diff = q - batch[j].target;
        loss += 0.5 * diff * diff;
        delta[j * out_dim + static_cast<std::size_t>(a)] = diff / static_cast<double>(B);
    }
    g.loss = loss / static_cast<double>(B);

    std::vector<double> delta_prev;
    for (std::size_t l = L; l-- > 0;) {
        const auto rows = static_cast<std::size_t>(net.dims[l + 1]);
        const auto cols = static_cast<std::size_t>(net.dims[l]);
        const auto& below = activations[l];
        auto& dw = g.d_weights[l];
        auto& db = g.d_biases[l];
        for (std::size_t j = 0; j < B; ++j) {
            const double* dj = delta.data() + j * rows;
            const double* aj = below.data() + j * cols;
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = dj[r];
                if (d == 0.0) continue;
                db[r] += d;
                double* wr = dw.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) wr[c] += d * aj[c];
            }
        }
        if (l == 0) break;
        // delta_prev = (delta * W_l) masked by the ReLU that produced below.
        delta_prev.assign(B * cols, 0.0);
        for (std::size_t j = 0; j < B; ++j) {
            const double* dj = delta.data() + j * rows;
            double* pj = delta_prev.data() + j * cols;
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = dj[r];
                if (d == 0.0) continue;
                const double* wr = net.weights[l].data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) pj[c] += d * wr[c];
            }
            const double* aj = below.data() + j * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                if (aj[c] <= 0.0) pj[c] = 0.0;
            }
        }
        delta.swap(delta_prev);
    }
    return g;
}

void adam_step(Mlp& net, AdamState& adam, const GradBundle& grads) {
    check_shapes(net);
    if (grads.d_weights.size() != net.weights.size()) throw std::invalid_argument("gradient shape mismatch");
    adam.t += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
    auto update = [&](std::vector<double>& theta, std::vector<double>& m,
                      std::vector<double>& v, const std::vector<double>& g) {
        if (g.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
            throw std::invalid_argument("gradient shape mismatch");
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= adam.alpha * m_hat / (std::sqrt(v_hat) + adam.epsilon);
        }
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        update(net.weights[l], adam.m_weights[l], adam.v_weights[l], grads.d_weights[l]);
        update(net.biases[l], adam.m_biases[l], adam.v_biases[l], grads.d_biases[l]);
    }
}

GradCheckReport grad_check(const Mlp& net, const std::vector<BatchItem>& batch,
                           double step, double tolerance) {
    const auto analytic = loss_and_grads(net, batch);
    GradCheckReport rep;
    rep.loss = analytic.loss;
    Mlp probe = net;
    auto scan = [&](std::vector<double>& theta, const std::vector<double>& ga) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double saved = theta[i];
            theta[i] = saved + step;
            const double up = batch_loss(probe, batch);
            theta[i] = saved - step;
            const double down = batch_loss(probe, batch);
            theta[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::fabs(ga[i]), std::fabs(numeric), 1e-6});
            rep.max_rel_error = std::max(rep.max_rel_error, std::fabs(ga[i] - numeric) / denom);
        }
    };
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
        scan(probe.weights[l], analytic.d_weights[l]);
        scan(probe.biases[l], analytic.d_biases[l]);
    }
    rep.passed = rep.max_rel_error < tolerance;
    return rep;
}

std::string serialize(const Mlp& net) {
    nlohmann::json j;
    j["dims"] = net.dims;
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    return j.dump();
}

Mlp deserialize(const std::string& payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed network payload");
    }
    Mlp net;
    try {
        j.at("dims").get_to(net.dims);
        j.at("weights").get_to(net.weights);
        j.at("biases").get_to(net.biases);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed network payload");
    }
    try {
        check_shapes(net);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("inconsistent network payload: ") + e.what());
    }
    return net;
}

} // namespace saferl::nn
