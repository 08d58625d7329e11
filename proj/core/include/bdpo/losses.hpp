#pragma once

#include <stdexcept>
#include <string>

namespace bdpo {

enum class LossKind { Dpo, Dpop, DpoNll, Bdpo };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Which loss to evaluate plus its hyperparameters. Fields that are
/// irrelevant to `kind` are ignored by evaluation.
struct LossSpec {
    LossKind kind = LossKind::Dpo;
    double beta = 0.1;     // temperature on the log-ratio reward
    double alpha = 1.0;    // NLL weight (DpoNll only)
    double penalty = 5.0;  // chosen-below-reference penalty weight (Dpop only)
    double mixture = 0.5;  // mixture weight in (0,1) (Bdpo only)

    void validate() const;

    static LossSpec dpo(double beta = 0.1);
    static LossSpec dpop(double beta = 0.1, double penalty = 5.0);
    static LossSpec dpo_nll(double beta = 0.1, double alpha = 1.0);
    static LossSpec bdpo(double beta = 0.1, double mixture = 0.5);
};

/// One evaluation point: chosen/rejected probabilities under the trained
/// model (p_w, p_l) and the frozen reference model (r_w, r_l).
struct PairPoint {
    double p_w;
    double p_l;
    double r_w;
    double r_l;
};

/// Partial derivatives of a loss with respect to the trained probabilities.
struct LossGradient {
    double d_p_w;
    double d_p_l;
};

/// Raised when a loss is evaluated where it is undefined (e.g. a zero
/// probability inside a logarithm).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// Numerically stable -log(sigmoid(x)) and sigmoid(x).
double neg_log_sigmoid(double x);
double sigmoid(double x);

/// beta * log(p_num / p_den); the scaled log-ratio score for either model.
double log_ratio_score(double p_num, double p_den, double beta);

/// lambda * p_theta + (1 - lambda) * p_ref.
double mixture_prob(double p_theta, double p_ref, double mixture);

double dpo_loss(const PairPoint& point, const LossSpec& spec);
double dpo_nll_loss(const PairPoint& point, const LossSpec& spec);
double dpop_loss(const PairPoint& point, const LossSpec& spec);
double bdpo_loss(const PairPoint& point, const LossSpec& spec);

/// Dispatch on spec.kind.
double loss(const PairPoint& point, const LossSpec& spec);

/// Closed-form partial derivatives of loss() at an interior point.
LossGradient analytic_gradient(const PairPoint& point, const LossSpec& spec);

/// beta * sigmoid(r(y_l) - r(y_w)) + alpha: the magnitude of the gradient
/// coefficient on log p_w for the DPO+NLL loss.
double nll_coefficient(const PairPoint& point, const LossSpec& spec);

}  // namespace bdpo
