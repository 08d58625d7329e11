#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bdpo {

/// Dense row-major matrix of doubles. Just enough linear algebra for a
/// fixed 2-layer network.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Max-subtracted softmax; output sums to 1.
std::vector<double> softmax_forward(std::span<const double> logits);

/// Sum_i p_i log(p_i / q_i), with 0 log 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Finite table policy: one logit row per prompt, row-wise softmax.
struct CategoricalPolicy {
    Matrix logits;  // [num_prompts x num_responses]

    std::vector<double> probs(std::size_t prompt) const;
};

/// Mean of -log p(chosen) over the dataset. Each pair is
/// (prompt, chosen_index, rejected_index); only the chosen index is used.
struct PreferencePair {
    std::size_t prompt;
    std::size_t chosen;
    std::size_t rejected;
};

double nll_of_chosen(const CategoricalPolicy& policy,
                     const std::vector<PreferencePair>& pairs);

/// Gradients of a scalar loss with respect to every MlpPolicy parameter.
struct ParamGradient {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    void accumulate(const ParamGradient& other, double scale);
    void fill(double value);
};

/// 2-layer perceptron over one-hot prompts: softmax(w2 relu(w1 x + b1) + b2).
class MlpPolicy {
  public:
    static constexpr std::size_t kHidden = 32;

    MlpPolicy(std::size_t num_prompts, std::size_t num_responses,
              std::uint64_t seed, std::size_t hidden = kHidden);

    std::size_t num_prompts() const { return w1_.cols; }
    std::size_t num_responses() const { return w2_.rows; }
    std::size_t hidden() const { return b1_.size(); }
    std::uint64_t seed() const { return seed_; }
    std::size_t parameter_count() const;

    std::vector<double> forward(std::size_t prompt_index) const;

    ParamGradient backprop(std::size_t prompt_index,
                           std::span<const double> dloss_dprobs) const;

    ParamGradient zero_gradient() const;
    void apply_update(const ParamGradient& grad, double step);

    /// Flat view over all parameters in (w1, b1, w2, b2) order; used by the
    /// finite-difference oracle and the Adam trainer.
    std::vector<double*> parameters();
    static std::vector<double*> gradient_view(ParamGradient& grad);

    Matrix& w1() { return w1_; }
    std::vector<double>& b1() { return b1_; }
    Matrix& w2() { return w2_; }
    std::vector<double>& b2() { return b2_; }
    const Matrix& w1() const { return w1_; }
    const std::vector<double>& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const std::vector<double>& b2() const { return b2_; }

  private:
    MlpPolicy() = default;
    friend MlpPolicy load_checkpoint(const std::string& path);

    Matrix w1_;                // [hidden x num_prompts]
    std::vector<double> b1_;   // [hidden]
    Matrix w2_;                // [num_responses x hidden]
    std::vector<double> b2_;   // [num_responses]
    std::uint64_t seed_ = 0;
};

/// JSON checkpoint with a {num_prompts, num_responses, hidden, seed} header.
/// Round-trips 64-bit floats losslessly.
void save_checkpoint(const MlpPolicy& policy, const std::string& path);
MlpPolicy load_checkpoint(const std::string& path);

}  // namespace bdpo
