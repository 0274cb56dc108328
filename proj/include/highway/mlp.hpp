#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Minimal feed-forward network with leaky-ReLU hidden layers, squared-error
// loss on selected outputs, exact backpropagation, and Adam updates.

namespace highway::mlp {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainSample {
    std::vector<double> input;
    int output_index = 0;
    double target = 0.0;
};

class Network {
  public:
    // He-style fan-in uniform initialization, seeded.
    Network(std::vector<int> layer_sizes, std::uint64_t seed,
            double leaky_slope = 0.01);
    Network() = default;

    std::vector<double> forward(std::span<const double> input) const;

    // One Adam step on the mean squared error of the selected outputs.
    // Returns the batch loss before the update.
    double train_batch(std::span<const TrainSample> batch, const AdamConfig& cfg);

    // Gradient of the batch loss, flattened in parameter order. Exposed so
    // the finite-difference check can compare against it.
    std::vector<double> gradient(std::span<const TrainSample> batch) const;
    double loss(std::span<const TrainSample> batch) const;

    int num_params() const;
    double get_param(int flat_index) const;
    void set_param(int flat_index, double value);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    double leaky_slope() const { return slope_; }
    std::int64_t step_count() const { return step_; }

    void save(const std::string& path) const;
    static Network load(const std::string& path);

    bool operator==(const Network& other) const;

  private:
    friend class NetworkIO;
    std::vector<int> sizes_;
    double slope_ = 0.01;
    // Per layer: weights (out x in, row-major) then biases.
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
    // Adam state, same shapes as the parameters.
    std::vector<std::vector<double>> m_w_, v_w_, m_b_, v_b_;
    std::int64_t step_ = 0;
};

}  // namespace highway::mlp
