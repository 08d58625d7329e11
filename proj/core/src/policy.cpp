#include "bdpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bdpo/rng.hpp"
#include "json.hpp"

namespace bdpo {

std::vector<double> softmax_forward(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    double max_logit = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
        max_logit = std::max(max_logit, v);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl_divergence: length mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] <= 0.0)
            throw std::invalid_argument("kl_divergence: q must be positive on p's support");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

std::vector<double> CategoricalPolicy::probs(std::size_t prompt) const {
    if (prompt >= logits.rows)
        throw std::out_of_range("CategoricalPolicy: prompt index out of range");
    return softmax_forward(
        std::span<const double>(logits.data.data() + prompt * logits.cols, logits.cols));
}

double nll_of_chosen(const CategoricalPolicy& policy,
                     const std::vector<PreferencePair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("nll_of_chosen: no pairs");
    double total = 0.0;
    for (const auto& pair : pairs) {
        const auto p = policy.probs(pair.prompt);
        if (pair.chosen >= p.size())
            throw std::out_of_range("nll_of_chosen: chosen index out of range");
        total += -std::log(p[pair.chosen]);
    }
    return total / static_cast<double>(pairs.size());
}

void ParamGradient::accumulate(const ParamGradient& other, double scale) {
    for (std::size_t i = 0; i < w1.data.size(); ++i) w1.data[i] += scale * other.w1.data[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += scale * other.b1[i];
    for (std::size_t i = 0; i < w2.data.size(); ++i) w2.data[i] += scale * other.w2.data[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += scale * other.b2[i];
}

void ParamGradient::fill(double value) {
    std::fill(w1.data.begin(), w1.data.end(), value);
    std::fill(b1.begin(), b1.end(), value);
    std::fill(w2.data.begin(), w2.data.end(), value);
    std::fill(b2.begin(), b2.end(), value);
}

MlpPolicy::MlpPolicy(std::size_t num_prompts, std::size_t num_responses,
                     std::uint64_t seed, std::size_t hidden)
    : w1_(hidden, num_prompts),
      b1_(hidden, 0.0),
      w2_(num_responses, hidden),
      b2_(num_responses, 0.0),
      seed_(seed) {
    SplitMix64 rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(num_prompts));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& v : w1_.data) v = rng.next_double(-a1, a1);
    for (double& v : b1_) v = rng.next_double(-a1, a1);
    for (double& v : w2_.data) v = rng.next_double(-a2, a2);
    for (double& v : b2_) v = rng.next_double(-a2, a2);
}

std::size_t MlpPolicy::parameter_count() const {
    return w1_.data.size() + b1_.size() + w2_.data.size() + b2_.size();
}

std::vector<double> MlpPolicy::forward(std::size_t prompt_index) const {
    if (prompt_index >= num_prompts())
        throw std::out_of_range("MlpPolicy: prompt index out of range");
    const std::size_t h = hidden();
    std::vector<double> act(h);
    for (std::size_t i = 0; i < h; ++i)
        act[i] = std::max(0.0, w1_(i, prompt_index) + b1_[i]);
    std::vector<double> logits(num_responses());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double z = b2_[i];
        for (std::size_t j = 0; j < h; ++j) z += w2_(i, j) * act[j];
        logits[i] = z;
    }
    return softmax_forward(logits);
}

ParamGradient MlpPolicy::backprop(std::size_t prompt_index,
                                  std::span<const double> dloss_dprobs) const {
    if (prompt_index >= num_prompts())
        throw std::out_of_range("MlpPolicy: prompt index out of range");
    if (dloss_dprobs.size() != num_responses())
        throw std::invalid_argument("backprop: dloss_dprobs length mismatch");

    const std::size_t h = hidden();
    std::vector<double> pre(h), act(h);
    for (std::size_t i = 0; i < h; ++i) {
        pre[i] = w1_(i, prompt_index) + b1_[i];
        act[i] = std::max(0.0, pre[i]);
    }
    std::vector<double> logits(num_responses());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double z = b2_[i];
        for (std::size_t j = 0; j < h; ++j) z += w2_(i, j) * act[j];
        logits[i] = z;
    }
    const std::vector<double> probs = softmax_forward(logits);

    // d loss / d logit_j = p_j (g_j - sum_i g_i p_i) for upstream g = dL/dp.
    double weighted = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) weighted += dloss_dprobs[i] * probs[i];
    std::vector<double> dlogits(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        dlogits[i] = probs[i] * (dloss_dprobs[i] - weighted);

    ParamGradient grad = zero_gradient();
    for (std::size_t i = 0; i < dlogits.size(); ++i) {
        grad.b2[i] = dlogits[i];
        for (std::size_t j = 0; j < h; ++j) grad.w2(i, j) = dlogits[i] * act[j];
    }
    // ReLU subgradient 0 at 0.
    std::vector<double> dact(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        if (pre[j] <= 0.0) continue;
        double v = 0.0;
        for (std::size_t i = 0; i < dlogits.size(); ++i) v += w2_(i, j) * dlogits[i];
        dact[j] = v;
    }
    for (std::size_t j = 0; j < h; ++j) {
        grad.b1[j] = dact[j];
        grad.w1(j, prompt_index) = dact[j];  // one-hot input
    }
    return grad;
}

ParamGradient MlpPolicy::zero_gradient() const {
    ParamGradient g;
    g.w1 = Matrix(w1_.rows, w1_.cols);
    g.b1.assign(b1_.size(), 0.0);
    g.w2 = Matrix(w2_.rows, w2_.cols);
    g.b2.assign(b2_.size(), 0.0);
    return g;
}

void MlpPolicy::apply_update(const ParamGradient& grad, double step) {
    for (std::size_t i = 0; i < w1_.data.size(); ++i) w1_.data[i] -= step * grad.w1.data[i];
    for (std::size_t i = 0; i < b1_.size(); ++i) b1_[i] -= step * grad.b1[i];
    for (std::size_t i = 0; i < w2_.data.size(); ++i) w2_.data[i] -= step * grad.w2.data[i];
    for (std::size_t i = 0; i < b2_.size(); ++i) b2_[i] -= step * grad.b2[i];
}

std::vector<double*> MlpPolicy::parameters() {
    std::vector<double*> ptrs;
    ptrs.reserve(parameter_count());
    for (double& v : w1_.data) ptrs.push_back(&v);
    for (double& v : b1_) ptrs.push_back(&v);
    for (double& v : w2_.data) ptrs.push_back(&v);
    for (double& v : b2_) ptrs.push_back(&v);
    return ptrs;
}

std::vector<double*> MlpPolicy::gradient_view(ParamGradient& grad) {
    std::vector<double*> ptrs;
    for (double& v : grad.w1.data) ptrs.push_back(&v);
    for (double& v : grad.b1) ptrs.push_back(&v);
    for (double& v : grad.w2.data) ptrs.push_back(&v);
    for (double& v : grad.b2) ptrs.push_back(&v);
    return ptrs;
}

void save_checkpoint(const MlpPolicy& policy, const std::string& path) {
    nlohmann::json doc;
    doc["num_prompts"] = policy.num_prompts();
    doc["num_responses"] = policy.num_responses();
    doc["hidden"] = policy.hidden();
    doc["seed"] = policy.seed();
    doc["w1"] = policy.w1().data;
    doc["b1"] = policy.b1();
    doc["w2"] = policy.w2().data;
    doc["b2"] = policy.b2();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << doc.dump(2) << '\n';
}

MlpPolicy load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    MlpPolicy policy;
    const std::size_t num_prompts = doc.at("num_prompts");
    const std::size_t num_responses = doc.at("num_responses");
    const std::size_t hidden = doc.at("hidden");
    policy.seed_ = doc.at("seed");
    policy.w1_ = Matrix(hidden, num_prompts);
    policy.w1_.data = doc.at("w1").get<std::vector<double>>();
    policy.b1_ = doc.at("b1").get<std::vector<double>>();
    policy.w2_ = Matrix(num_responses, hidden);
    policy.w2_.data = doc.at("w2").get<std::vector<double>>();
    policy.b2_ = doc.at("b2").get<std::vector<double>>();
    if (policy.w1_.data.size() != hidden * num_prompts ||
        policy.b1_.size() != hidden ||
        policy.w2_.data.size() != num_responses * hidden ||
        policy.b2_.size() != num_responses)
        throw std::runtime_error("checkpoint shape mismatch: " + path);
    return policy;
}

}  // namespace bdpo
