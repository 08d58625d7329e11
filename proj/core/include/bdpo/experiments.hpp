#pragma once

#include <cstdint>
#include <vector>

#include "bdpo/losses.hpp"
#include "bdpo/policy.hpp"

namespace bdpo {

enum class TaskMode {
    MainText,    // one preference pair per prompt, two OOD responses
    AppendixB1,  // two chosen / two rejected responses, no OOD
};

/// Four prompts, four candidate responses each; per-prompt preference pairs
/// drawn without replacement from a seed.
struct ToyTask {
    std::size_t num_prompts = 4;
    std::size_t num_responses = 4;
    std::vector<PreferencePair> pairs;
    std::vector<std::vector<std::size_t>> ood_indices;  // per prompt
    std::uint64_t seed = 0;
    TaskMode mode = TaskMode::MainText;
};

ToyTask generate_toy_task(std::uint64_t seed, TaskMode mode = TaskMode::MainText);

enum class Optimizer { PlainGd, Adam };

struct TrainingConfig {
    LossSpec loss_spec;
    int steps = 1500;
    double learning_rate = 0.05;
    Optimizer optimizer = Optimizer::Adam;
    bool line_search = false;  // backtracking, PlainGd only
    std::uint64_t seed = 7;    // policy initialization seed
    int trace_every = 10;

    void validate() const;
};

/// One trace record: a (recorded step, prompt) cell. kl_to_ref and
/// nll_chosen are dataset-level values repeated across the step's rows.
struct TraceRow {
    int step;
    std::size_t prompt;
    double p_chosen;
    double p_rejected;
    double log_p_chosen;
    double log_p_rejected;
    double kl_to_ref;
    double nll_chosen;
    double in_dist_log_mass;
    double loss;
};

struct TrainingTrace {
    std::vector<TraceRow> rows;
    std::vector<double> ref_p_chosen;  // per prompt, at initialization
    std::vector<std::vector<double>> ref_probs;    // per prompt
    std::vector<std::vector<double>> final_probs;  // per prompt, after training
    bool line_search_failed = false;
    int line_search_failed_step = -1;
};

/// Full-batch training of a cloned reference MLP on the toy pairs.
TrainingTrace train_toy(const ToyTask& task, const TrainingConfig& config);

/// A single categorical distribution parametrized by free logits.
struct SimplexPoint {
    std::vector<double> probs;
};

struct SimplexDescentOptions {
    Optimizer optimizer = Optimizer::PlainGd;
    double learning_rate = 5.0;
};

/// Gradient descent on the free logits of one categorical distribution,
/// minimizing the pairwise loss for a single (chosen, rejected) pair.
/// Initialized at the reference distribution.
SimplexPoint minimize_over_simplex(const std::vector<double>& ref,
                                   std::size_t chosen, std::size_t rejected,
                                   const LossSpec& spec, int steps,
                                   const SimplexDescentOptions& opts = {});

// ---- verification suites ----

struct Theorem1SeedResult {
    std::uint64_t seed;
    std::vector<double> reference;
    double bdpo_p_chosen, bdpo_p_rejected;
    double dpo_p_chosen, dpo_p_rejected;
    bool bdpo_converged;      // p_chosen >= 0.99 and p_rejected <= 0.01
    bool dpo_rejected_small;  // p_rejected <= 0.01
};

struct Theorem1Report {
    std::vector<Theorem1SeedResult> seeds;
    int dpo_chosen_below_threshold = 0;  // seeds where DPO left p_chosen < 0.99
    bool pass = false;
};

/// BDPO simplex minimization must reach the (1, 0) corner for every seed;
/// the DPO companion must drive p_rejected to ~0 without that implying
/// p_chosen growth.
Theorem1Report verify_theorem1(int num_seeds, std::uint64_t base_seed,
                               double beta = 0.1, double mixture = 0.5,
                               int steps = 5000);

struct Theorem2StepRecord {
    int step;
    double loss;
    double min_margin;  // min over prompts of p_chosen - bound
    bool bound_held;
};

struct Theorem2Report {
    std::vector<Theorem2StepRecord> steps;
    std::vector<double> bounds;  // per prompt: (1 - lambda) * ref_p_chosen
    bool monotone = true;
    bool bound_held = true;
    bool line_search_failed = false;
    bool pass = false;  // bound held at every step where monotone descent held
};

Theorem2Report verify_theorem2(const ToyTask& task, const LossSpec& spec_bdpo,
                               const TrainingConfig& config);

struct Corollary1Report {
    std::vector<double> bdpo_minimizer;
    double forward_dpo_loss;     // DPO loss at the BDPO minimizer
    double counter_dpo_loss;     // DPO loss at the counterexample point
    double counter_bdpo_loss;    // BDPO loss at the counterexample point
    double bdpo_grid_min;        // BDPO minimum over the probe grid
    bool forward_pass = false;   // forward_dpo_loss < 1e-6
    bool counter_pass = false;   // counter_dpo_loss < 1e-6 and gap > 0.01
    bool pass = false;
};

/// Forward direction: the BDPO minimizer also (near-)minimizes DPO.
/// Counterexample: p_w = 0.1, p_l = epsilon minimizes DPO but not BDPO.
Corollary1Report verify_corollary1(const std::vector<double>& ref,
                                   const LossSpec& spec_bdpo,
                                   const LossSpec& spec_dpo,
                                   double epsilon = 1e-9);

struct GradientCheckReport {
    struct PerLoss {
        LossKind kind;
        double max_rel_err = 0.0;
        bool pass = false;
    };
    std::vector<PerLoss> losses;
    bool pass = false;
};

/// Central finite difference of loss() in one coordinate of the pair point.
double central_difference(const PairPoint& point, const LossSpec& spec,
                          bool wrt_p_w, double step = 1e-6);

/// Analytic gradients vs central finite differences on random interior
/// points, all four losses.
GradientCheckReport verify_gradients(int samples, std::uint64_t seed,
                                     double tolerance = 1e-6);

}  // namespace bdpo
