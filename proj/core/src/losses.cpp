#include "bdpo/losses.hpp"

#include <algorithm>
#include <cmath>

namespace bdpo {

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Dpo: return "dpo";
        case LossKind::Dpop: return "dpop";
        case LossKind::DpoNll: return "dpo-nll";
        case LossKind::Bdpo: return "bdpo";
    }
    return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "dpo") return LossKind::Dpo;
    if (name == "dpop") return LossKind::Dpop;
    if (name == "dpo-nll" || name == "dpo_nll" || name == "dponll") return LossKind::DpoNll;
    if (name == "bdpo") return LossKind::Bdpo;
    throw std::invalid_argument("unknown loss kind: " + name);
}

void LossSpec::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("LossSpec: beta must be > 0");
    if (alpha < 0.0) throw std::invalid_argument("LossSpec: alpha must be >= 0");
    if (penalty < 0.0) throw std::invalid_argument("LossSpec: penalty must be >= 0");
    if (kind == LossKind::Bdpo && !(mixture > 0.0 && mixture < 1.0))
        throw std::invalid_argument("LossSpec: mixture must be in (0,1) for bdpo");
}

LossSpec LossSpec::dpo(double beta) { return {LossKind::Dpo, beta, 0.0, 0.0, 0.5}; }
LossSpec LossSpec::dpop(double beta, double penalty) { return {LossKind::Dpop, beta, 0.0, penalty, 0.5}; }
LossSpec LossSpec::dpo_nll(double beta, double alpha) { return {LossKind::DpoNll, beta, alpha, 0.0, 0.5}; }
LossSpec LossSpec::bdpo(double beta, double mixture) { return {LossKind::Bdpo, beta, 0.0, 0.0, mixture}; }

double neg_log_sigmoid(double x) {
    // -log sigmoid(x) = softplus(-x), kept overflow-free for large |x|.
    if (x < 0.0) return -x + std::log1p(std::exp(x));
    return std::log1p(std::exp(-x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw DomainError(std::string(name) + " must be > 0");
}

void require_reference(const PairPoint& pt) {
    require_positive(pt.r_w, "r_w");
    require_positive(pt.r_l, "r_l");
}

// Argument of the sigmoid in the DPO loss.
double dpo_margin(const PairPoint& pt, double beta) {
    return beta * (std::log(pt.p_w / pt.r_w) - std::log(pt.p_l / pt.r_l));
}

// Argument of the sigmoid in the DPOP loss: the DPO margin minus the
// penalty on a chosen reward below zero.
double dpop_margin(const PairPoint& pt, const LossSpec& spec) {
    // Shares the DPO margin expression exactly so that DPOP equals DPO
    // bit-for-bit whenever the penalty is inactive.
    const double reward_w = log_ratio_score(pt.p_w, pt.r_w, spec.beta);
    return dpo_margin(pt, spec.beta) - spec.penalty * std::max(0.0, -reward_w);
}

double bdpo_margin(const PairPoint& pt, const LossSpec& spec) {
    const double mix = mixture_prob(pt.p_l, pt.r_l, spec.mixture);
    return spec.beta * (std::log(pt.p_w / mix) - std::log(pt.r_w / pt.r_l));
}

}  // namespace

double log_ratio_score(double p_num, double p_den, double beta) {
    require_positive(p_num, "numerator probability");
    require_positive(p_den, "denominator probability");
    return beta * std::log(p_num / p_den);
}

double mixture_prob(double p_theta, double p_ref, double mixture) {
    return mixture * p_theta + (1.0 - mixture) * p_ref;
}

double dpo_loss(const PairPoint& pt, const LossSpec& spec) {
    require_reference(pt);
    require_positive(pt.p_w, "p_w");
    require_positive(pt.p_l, "p_l");
    return neg_log_sigmoid(dpo_margin(pt, spec.beta));
}

double dpo_nll_loss(const PairPoint& pt, const LossSpec& spec) {
    return dpo_loss(pt, spec) + spec.alpha * (-std::log(pt.p_w));
}

double dpop_loss(const PairPoint& pt, const LossSpec& spec) {
    require_reference(pt);
    require_positive(pt.p_w, "p_w");
    require_positive(pt.p_l, "p_l");
    return neg_log_sigmoid(dpop_margin(pt, spec));
}

double bdpo_loss(const PairPoint& pt, const LossSpec& spec) {
    require_reference(pt);
    require_positive(pt.p_w, "p_w");
    if (pt.p_l < 0.0) throw DomainError("p_l must be >= 0");
    return neg_log_sigmoid(bdpo_margin(pt, spec));
}

double loss(const PairPoint& pt, const LossSpec& spec) {
    switch (spec.kind) {
        case LossKind::Dpo: return dpo_loss(pt, spec);
        case LossKind::Dpop: return dpop_loss(pt, spec);
        case LossKind::DpoNll: return dpo_nll_loss(pt, spec);
        case LossKind::Bdpo: return bdpo_loss(pt, spec);
    }
    throw std::invalid_argument("loss: bad kind");
}

LossGradient analytic_gradient(const PairPoint& pt, const LossSpec& spec) {
    require_reference(pt);
    require_positive(pt.p_w, "p_w");
    switch (spec.kind) {
        case LossKind::Dpo: {
            require_positive(pt.p_l, "p_l");
            const double s = sigmoid(-dpo_margin(pt, spec.beta));
            return {-spec.beta * s / pt.p_w, spec.beta * s / pt.p_l};
        }
        case LossKind::DpoNll: {
            require_positive(pt.p_l, "p_l");
            const double s = sigmoid(-dpo_margin(pt, spec.beta));
            return {-spec.beta * s / pt.p_w - spec.alpha / pt.p_w,
                    spec.beta * s / pt.p_l};
        }
        case LossKind::Dpop: {
            require_positive(pt.p_l, "p_l");
            const double s = sigmoid(-dpop_margin(pt, spec));
            // Subgradient 0 for the max at p_w == r_w (penalty-inactive branch).
            const double w_factor =
                pt.p_w < pt.r_w ? spec.beta * (1.0 + spec.penalty) : spec.beta;
            return {-s * w_factor / pt.p_w, spec.beta * s / pt.p_l};
        }
        case LossKind::Bdpo: {
            if (pt.p_l < 0.0) throw DomainError("p_l must be >= 0");
            const double mix = mixture_prob(pt.p_l, pt.r_l, spec.mixture);
            const double s = sigmoid(-bdpo_margin(pt, spec));
            return {-spec.beta * s / pt.p_w, spec.beta * s * spec.mixture / mix};
        }
    }
    throw std::invalid_argument("analytic_gradient: bad kind");
}

double nll_coefficient(const PairPoint& pt, const LossSpec& spec) {
    if (spec.kind != LossKind::DpoNll)
        throw std::invalid_argument("nll_coefficient requires a dpo-nll spec");
    const double reward_w = log_ratio_score(pt.p_w, pt.r_w, spec.beta);
    const double reward_l = log_ratio_score(pt.p_l, pt.r_l, spec.beta);
    return spec.beta * sigmoid(reward_l - reward_w) + spec.alpha;
}

}  // namespace bdpo
