#include "highway/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace highway::mlp {

Network::Network(std::vector<int> layer_sizes, std::uint64_t seed, double leaky_slope)
    : sizes_(std::move(layer_sizes)), slope_(leaky_slope) {
    if (sizes_.size() < 2) throw std::invalid_argument("mlp: need >= 2 layers");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int fan_in = sizes_[l];
        const int fan_out = sizes_[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (double& x : w) x = dist(rng);
        weights_.push_back(std::move(w));
        biases_.emplace_back(fan_out, 0.0);
        m_w_.emplace_back(static_cast<std::size_t>(fan_in) * fan_out, 0.0);
        v_w_.emplace_back(static_cast<std::size_t>(fan_in) * fan_out, 0.0);
        m_b_.emplace_back(fan_out, 0.0);
        v_b_.emplace_back(fan_out, 0.0);
    }
}

std::vector<double> Network::forward(std::span<const double> input) const {
    std::vector<double> act(input.begin(), input.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const int in = sizes_[l];
        const int out = sizes_[l + 1];
        std::vector<double> next(out);
        const bool hidden = l + 1 < weights_.size();
        for (int o = 0; o < out; ++o) {
            double z = biases_[l][o];
            const double* wrow = &weights_[l][static_cast<std::size_t>(o) * in];
            for (int i = 0; i < in; ++i) z += wrow[i] * act[i];
            next[o] = hidden && z < 0.0 ? slope_ * z : z;
        }
        act = std::move(next);
    }
    return act;
}

namespace {

struct Tape {
    std::vector<std::vector<double>> activations;  // per layer, post-activation
    std::vector<std::vector<double>> preacts;      // per layer, pre-activation
};

void forward_with_tape(const std::vector<int>& sizes,
                       const std::vector<std::vector<double>>& weights,
                       const std::vector<std::vector<double>>& biases,
                       double slope, std::span<const double> input, Tape& tape) {
    tape.activations.clear();
    tape.preacts.clear();
    tape.activations.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        std::vector<double> z(out);
        std::vector<double> a(out);
        const bool hidden = l + 1 < weights.size();
        for (int o = 0; o < out; ++o) {
            double acc = biases[l][o];
            const double* wrow = &weights[l][static_cast<std::size_t>(o) * in];
            for (int i = 0; i < in; ++i) acc += wrow[i] * tape.activations[l][i];
            z[o] = acc;
            a[o] = hidden && acc < 0.0 ? slope * acc : acc;
        }
        tape.preacts.push_back(std::move(z));
        tape.activations.push_back(std::move(a));
    }
}

}  // namespace

double Network::loss(std::span<const TrainSample> batch) const {
    double total = 0.0;
    for (const TrainSample& s : batch) {
        const std::vector<double> q = forward(s.input);
        const double e = q[s.output_index] - s.target;
        total += e * e;
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> Network::gradient(std::span<const TrainSample> batch) const {
    std::vector<std::vector<double>> gw, gb;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        gw.emplace_back(weights_[l].size(), 0.0);
        gb.emplace_back(biases_[l].size(), 0.0);
    }

    Tape tape;
    for (const TrainSample& s : batch) {
        forward_with_tape(sizes_, weights_, biases_, slope_, s.input, tape);
        const std::size_t last = weights_.size() - 1;
        std::vector<double> delta(sizes_.back(), 0.0);
        const double q = tape.activations.back()[s.output_index];
        delta[s.output_index] = 2.0 * (q - s.target) / static_cast<double>(batch.size());

        for (std::size_t l = last + 1; l-- > 0;) {
            const int in = sizes_[l];
            const int out = sizes_[l + 1];
            std::vector<double> prev_delta(in, 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                gb[l][o] += d;
                double* gl = &gw[l][static_cast<std::size_t>(o) * in];
                const double* wrow = &weights_[l][static_cast<std::size_t>(o) * in];
                const std::vector<double>& act = tape.activations[l];
                for (int i = 0; i < in; ++i) {
                    gl[i] += d * act[i];
                    prev_delta[i] += d * wrow[i];
                }
            }
            if (l > 0) {
                // Apply the leaky-ReLU derivative of the layer below.
                for (int i = 0; i < in; ++i) {
                    if (tape.preacts[l - 1][i] < 0.0) prev_delta[i] *= slope_;
                }
            }
            delta = std::move(prev_delta);
        }
    }

    std::vector<double> flat;
    flat.reserve(num_params());
    for (std::size_t l = 0; l < gw.size(); ++l) {
        flat.insert(flat.end(), gw[l].begin(), gw[l].end());
        flat.insert(flat.end(), gb[l].begin(), gb[l].end());
    }
    return flat;
}

double Network::train_batch(std::span<const TrainSample> batch, const AdamConfig& cfg) {
    const double before = loss(batch);
    if (!std::isfinite(before)) {
        throw std::runtime_error("mlp: non-finite loss, aborting training step");
    }
    const std::vector<double> grad = gradient(batch);

    ++step_;
    const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto update = [&](std::vector<double>& p, std::vector<double>& m,
                          std::vector<double>& v) {
            for (std::size_t i = 0; i < p.size(); ++i, ++k) {
                const double gval = grad[k];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gval;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gval * gval;
                const double mh = m[i] / corr1;
                const double vh = v[i] / corr2;
                p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
            }
        };
        update(weights_[l], m_w_[l], v_w_[l]);
        update(biases_[l], m_b_[l], v_b_[l]);
    }
    return before;
}

int Network::num_params() const {
    int n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        n += static_cast<int>(weights_[l].size() + biases_[l].size());
    }
    return n;
}

double Network::get_param(int flat_index) const {
    int k = flat_index;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (k < static_cast<int>(weights_[l].size())) return weights_[l][k];
        k -= static_cast<int>(weights_[l].size());
        if (k < static_cast<int>(biases_[l].size())) return biases_[l][k];
        k -= static_cast<int>(biases_[l].size());
    }
    throw std::out_of_range("mlp: parameter index");
}

void Network::set_param(int flat_index, double value) {
    int k = flat_index;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (k < static_cast<int>(weights_[l].size())) {
            weights_[l][k] = value;
            return;
        }
        k -= static_cast<int>(weights_[l].size());
        if (k < static_cast<int>(biases_[l].size())) {
            biases_[l][k] = value;
            return;
        }
        k -= static_cast<int>(biases_[l].size());
    }
    throw std::out_of_range("mlp: parameter index");
}

// Checkpoint layout: plain text, line oriented. Values are printed with 17
// significant digits, which round-trips IEEE doubles exactly; no byte-order
// concerns.
void Network::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("mlp: cannot open " + path);
    f << "mlp-checkpoint 1\n";
    f << sizes_.size();
    for (int s : sizes_) f << ' ' << s;
    f << '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", slope_);
    f << buf << ' ' << step_ << '\n';
    auto dump = [&](const std::vector<std::vector<double>>& vv) {
        for (const auto& v : vv) {
            for (double x : v) {
                std::snprintf(buf, sizeof buf, "%.17g", x);
                f << buf << '\n';
            }
        }
    };
    dump(weights_);
    dump(biases_);
    dump(m_w_);
    dump(v_w_);
    dump(m_b_);
    dump(v_b_);
    if (!f) throw std::runtime_error("mlp: write failed for " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("mlp: cannot open " + path);
    std::string magic;
    int version = 0;
    f >> magic >> version;
    if (magic != "mlp-checkpoint" || version != 1) {
        throw std::runtime_error("mlp: bad checkpoint header in " + path);
    }
    std::size_t n_layers = 0;
    f >> n_layers;
    std::vector<int> sizes(n_layers);
    for (auto& s : sizes) f >> s;
    Network net(sizes, 0);
    f >> net.slope_ >> net.step_;
    auto fill = [&](std::vector<std::vector<double>>& vv) {
        for (auto& v : vv) {
            for (double& x : v) f >> x;
        }
    };
    fill(net.weights_);
    fill(net.biases_);
    fill(net.m_w_);
    fill(net.v_w_);
    fill(net.m_b_);
    fill(net.v_b_);
    if (!f) throw std::runtime_error("mlp: truncated checkpoint " + path);
    return net;
}

bool Network::operator==(const Network& other) const {
    return sizes_ == other.sizes_ && slope_ == other.slope_ &&
           weights_ == other.weights_ && biases_ == other.biases_;
}

}  // namespace highway::mlp
