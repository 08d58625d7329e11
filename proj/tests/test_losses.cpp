#include <cmath>
#include <stdexcept>

#include "bdpo/experiments.hpp"
#include "bdpo/losses.hpp"
#include "bdpo/rng.hpp"
#include "doctest.h"

namespace {

constexpr double kLn2 = 0.69314718055994531;

// Random interior point with p_w + p_l <= 0.98 and everything in [0.05, 0.9].
bdpo::PairPoint random_point(bdpo::SplitMix64& rng) {
    for (;;) {
        bdpo::PairPoint pt{rng.next_double(0.05, 0.9), rng.next_double(0.05, 0.9),
                           rng.next_double(0.05, 0.9), rng.next_double(0.05, 0.9)};
        if (pt.p_w + pt.p_l <= 0.98 && pt.r_w + pt.r_l <= 0.98) return pt;
    }
}

}  // namespace

TEST_CASE("log_ratio_score matches frozen values") {
    CHECK(bdpo::log_ratio_score(0.4, 0.1, 0.1) ==
          doctest::Approx(0.13862943611198906).epsilon(1e-15));
    CHECK(bdpo::log_ratio_score(0.3, 0.3, 0.1) == 0.0);
    CHECK(bdpo::log_ratio_score(0.2, 0.8, 1.0) ==
          doctest::Approx(-1.3862943611198906).epsilon(1e-15));
    CHECK_THROWS_AS(bdpo::log_ratio_score(0.0, 0.1, 0.1), bdpo::DomainError);
    CHECK_THROWS_AS(bdpo::log_ratio_score(0.1, 0.0, 0.1), bdpo::DomainError);
}

TEST_CASE("dpo_loss frozen values and scale invariance example") {
    const bdpo::LossSpec spec = bdpo::LossSpec::dpo(0.1);
    CHECK(bdpo::dpo_loss({0.4, 0.1, 0.4, 0.1}, spec) ==
          doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(bdpo::dpo_loss({0.4, 0.05, 0.4, 0.1}, spec) ==
          doctest::Approx(0.65909026761122674).epsilon(1e-15));
    // DPO depends only on the ratio p_w / p_l.
    CHECK(bdpo::dpo_loss({0.2, 0.05, 0.4, 0.1}, spec) ==
          bdpo::dpo_loss({0.4, 0.1, 0.4, 0.1}, spec));
    CHECK_THROWS_AS(bdpo::dpo_loss({0.4, 0.0, 0.4, 0.1}, spec), bdpo::DomainError);
}

TEST_CASE("dpo_nll_loss frozen values") {
    const bdpo::LossSpec spec = bdpo::LossSpec::dpo_nll(0.1, 1.0);
    CHECK(bdpo::dpo_nll_loss({0.4, 0.1, 0.4, 0.1}, spec) ==
          doctest::Approx(1.6094379124341004).epsilon(1e-15));
    // alpha = 0 degenerates to plain DPO.
    const bdpo::LossSpec zero = bdpo::LossSpec::dpo_nll(0.1, 0.0);
    bdpo::SplitMix64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        CHECK(bdpo::dpo_nll_loss(pt, zero) == bdpo::dpo_loss(pt, bdpo::LossSpec::dpo(0.1)));
    }
    // p_w = 1 contributes no NLL term.
    CHECK(bdpo::dpo_nll_loss({1.0, 0.1, 0.4, 0.1}, spec) ==
          bdpo::dpo_loss({1.0, 0.1, 0.4, 0.1}, bdpo::LossSpec::dpo(0.1)));
}

TEST_CASE("dpop_loss frozen value and DPO agreement") {
    const bdpo::LossSpec spec = bdpo::LossSpec::dpop(0.1, 5.0);
    CHECK(bdpo::dpop_loss({0.2, 0.1, 0.4, 0.1}, spec) ==
          doctest::Approx(0.92255768007208308).epsilon(1e-15));
    // Penalty inactive whenever p_w >= r_w, for any penalty weight.
    bdpo::SplitMix64 rng(12);
    for (int i = 0; i < 100; ++i) {
        bdpo::PairPoint pt = random_point(rng);
        if (pt.p_w < pt.r_w) std::swap(pt.p_w, pt.r_w);
        const bdpo::LossSpec heavy = bdpo::LossSpec::dpop(0.1, rng.next_double(0.0, 50.0));
        CHECK(bdpo::dpop_loss(pt, heavy) == bdpo::dpo_loss(pt, bdpo::LossSpec::dpo(0.1)));
    }
    // penalty = 0 degenerates to plain DPO everywhere.
    const bdpo::LossSpec off = bdpo::LossSpec::dpop(0.1, 0.0);
    for (int i = 0; i < 100; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        CHECK(bdpo::dpop_loss(pt, off) == bdpo::dpo_loss(pt, bdpo::LossSpec::dpo(0.1)));
    }
}

TEST_CASE("dpop_loss parenthesizations agree") {
    // Scores-inside form: s_w - s_l - penalty * max(0, -s_w), s = beta log(p/r).
    // Beta-outside form: beta * (l_w - l_l - penalty * max(0, -l_w)), l = log(p/r).
    bdpo::SplitMix64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        const double beta = rng.next_double(0.01, 2.0);
        const double penalty = rng.next_double(0.0, 10.0);
        const double s_w = bdpo::log_ratio_score(pt.p_w, pt.r_w, beta);
        const double s_l = bdpo::log_ratio_score(pt.p_l, pt.r_l, beta);
        const double inside = bdpo::neg_log_sigmoid(s_w - s_l - penalty * std::max(0.0, -s_w));
        const double l_w = std::log(pt.p_w / pt.r_w);
        const double l_l = std::log(pt.p_l / pt.r_l);
        const double outside =
            bdpo::neg_log_sigmoid(beta * (l_w - l_l - penalty * std::max(0.0, -l_w)));
        const double actual = bdpo::dpop_loss(pt, {bdpo::LossKind::Dpop, beta, 1.0, penalty, 0.5});
        CHECK(inside == doctest::Approx(actual).epsilon(1e-12));
        CHECK(outside == doctest::Approx(actual).epsilon(1e-12));
    }
}

TEST_CASE("mixture_prob examples and lower bound") {
    CHECK(bdpo::mixture_prob(0.0, 0.1, 0.5) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(bdpo::mixture_prob(0.1, 0.1, 0.5) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(bdpo::mixture_prob(0.8, 0.2, 0.25) == doctest::Approx(0.35).epsilon(1e-15));
    bdpo::SplitMix64 rng(14);
    for (int i = 0; i < 200; ++i) {
        const double p = rng.next_double();
        const double r = rng.next_double();
        const double m = rng.next_double(0.01, 0.99);
        CHECK(bdpo::mixture_prob(p, r, m) >= (1.0 - m) * r);
    }
}

TEST_CASE("bdpo_loss frozen values and p_l = 0 legality") {
    const bdpo::LossSpec spec = bdpo::LossSpec::bdpo(0.1, 0.5);
    CHECK(bdpo::bdpo_loss({0.4, 0.1, 0.4, 0.1}, spec) ==
          doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(bdpo::bdpo_loss({0.4, 0.0, 0.4, 0.1}, spec) ==
          doctest::Approx(0.65909026761122674).epsilon(1e-15));
    // Finite across the whole p_l range.
    for (double p_l = 0.0; p_l <= 1.0; p_l += 0.05)
        CHECK(std::isfinite(bdpo::bdpo_loss({0.4, p_l, 0.4, 0.1}, spec)));
    // The (1, 0) corner beats any other feasible point.
    const double best = bdpo::bdpo_loss({1.0, 0.0, 0.4, 0.1}, spec);
    bdpo::SplitMix64 rng(15);
    for (int i = 0; i < 500; ++i) {
        const double p_w = rng.next_double(0.001, 0.999);
        const double p_l = rng.next_double(0.0, 1.0 - p_w);
        CHECK(bdpo::bdpo_loss({p_w, p_l, 0.4, 0.1}, spec) > best);
    }
    CHECK_THROWS_AS(bdpo::bdpo_loss({0.0, 0.1, 0.4, 0.1}, spec), bdpo::DomainError);
    CHECK_THROWS_AS(bdpo::bdpo_loss({0.4, 0.1, 0.4, 0.0}, spec), bdpo::DomainError);
}

TEST_CASE("loss dispatches on kind") {
    const bdpo::PairPoint ref{0.4, 0.1, 0.4, 0.1};
    CHECK(bdpo::loss(ref, bdpo::LossSpec::dpo(0.1)) == doctest::Approx(kLn2));
    CHECK(bdpo::loss(ref, bdpo::LossSpec::bdpo(0.1, 0.5)) == doctest::Approx(kLn2));
    const bdpo::PairPoint pt{0.2, 0.1, 0.4, 0.1};
    CHECK(bdpo::loss(pt, bdpo::LossSpec::dpop(0.1, 0.0)) ==
          bdpo::dpo_loss(pt, bdpo::LossSpec::dpo(0.1)));
}

TEST_CASE("reference point universality across hyperparameters") {
    bdpo::SplitMix64 rng(16);
    for (int i = 0; i < 100; ++i) {
        const double r_w = rng.next_double(0.05, 0.6);
        const double r_l = rng.next_double(0.05, 1.0 - r_w - 0.01);
        const bdpo::PairPoint ref{r_w, r_l, r_w, r_l};
        const double beta = rng.next_double(0.01, 5.0);
        CHECK(bdpo::loss(ref, bdpo::LossSpec::dpo(beta)) ==
              doctest::Approx(kLn2).epsilon(1e-13));
        CHECK(bdpo::loss(ref, bdpo::LossSpec::dpop(beta, rng.next_double(0.0, 10.0))) ==
              doctest::Approx(kLn2).epsilon(1e-13));
        CHECK(bdpo::loss(ref, bdpo::LossSpec::dpo_nll(beta, 0.0)) ==
              doctest::Approx(kLn2).epsilon(1e-13));
        CHECK(bdpo::loss(ref, bdpo::LossSpec::bdpo(beta, rng.next_double(0.01, 0.99))) ==
              doctest::Approx(kLn2).epsilon(1e-13));
    }
}

TEST_CASE("irrelevant hyperparameters do not change the value") {
    bdpo::SplitMix64 rng(17);
    for (int i = 0; i < 100; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        bdpo::LossSpec a = bdpo::LossSpec::dpo(0.1);
        bdpo::LossSpec b = a;
        b.alpha = 7.0;
        b.penalty = 3.0;
        b.mixture = 0.9;
        CHECK(bdpo::loss(pt, a) == bdpo::loss(pt, b));
        bdpo::LossSpec c = bdpo::LossSpec::bdpo(0.1, 0.5);
        bdpo::LossSpec d = c;
        d.alpha = 7.0;
        d.penalty = 3.0;
        CHECK(bdpo::loss(pt, c) == bdpo::loss(pt, d));
    }
}

TEST_CASE("monotonicity in p_l and p_w for all losses") {
    const bdpo::LossSpec specs[] = {bdpo::LossSpec::dpo(0.1), bdpo::LossSpec::dpop(0.1, 5.0),
                                    bdpo::LossSpec::dpo_nll(0.1, 1.0),
                                    bdpo::LossSpec::bdpo(0.1, 0.5)};
    bdpo::SplitMix64 rng(18);
    for (const auto& spec : specs) {
        for (int i = 0; i < 100; ++i) {
            const bdpo::PairPoint pt = random_point(rng);
            bdpo::PairPoint up_l = pt;
            up_l.p_l = pt.p_l + rng.next_double(0.001, 0.05);
            CHECK(bdpo::loss(up_l, spec) > bdpo::loss(pt, spec));
            bdpo::PairPoint up_w = pt;
            up_w.p_w = pt.p_w + rng.next_double(0.001, 0.05);
            CHECK(bdpo::loss(up_w, spec) < bdpo::loss(pt, spec));
        }
    }
}

TEST_CASE("dpo scale invariance, bdpo scale sensitivity") {
    bdpo::SplitMix64 rng(19);
    const bdpo::LossSpec dpo = bdpo::LossSpec::dpo(0.1);
    const bdpo::LossSpec bd = bdpo::LossSpec::bdpo(0.1, 0.5);
    for (int i = 0; i < 500; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        const double c_max = 1.0 / std::max(pt.p_w, pt.p_l);
        const double c = rng.next_double(0.05, c_max);
        bdpo::PairPoint scaled = pt;
        scaled.p_w *= c;
        scaled.p_l *= c;
        CHECK(std::abs(bdpo::loss(scaled, dpo) - bdpo::loss(pt, dpo)) <= 1e-12);
        if (c < 1.0)
            CHECK(bdpo::loss(scaled, bd) > bdpo::loss(pt, bd));
        else if (c > 1.0)
            CHECK(bdpo::loss(scaled, bd) < bdpo::loss(pt, bd));
    }
}

TEST_CASE("bdpo rejected-gradient boundedness, dpo divergence") {
    const bdpo::LossSpec bd = bdpo::LossSpec::bdpo(0.1, 0.5);
    const bdpo::PairPoint base{0.4, 0.0, 0.4, 0.1};
    const double bound = 0.1 * 0.5 / ((1.0 - 0.5) * 0.1);
    for (double p_l = 0.0; p_l <= 1.0; p_l += 0.01) {
        bdpo::PairPoint pt = base;
        pt.p_l = p_l;
        const auto grad = bdpo::analytic_gradient(pt, bd);
        CHECK(std::abs(grad.d_p_l) <= bound + 1e-12);
    }
    // DPO's rejected gradient blows up near zero.
    const bdpo::LossSpec dpo = bdpo::LossSpec::dpo(0.1);
    const auto near_zero = bdpo::analytic_gradient({0.4, 1e-12, 0.4, 0.1}, dpo);
    CHECK(near_zero.d_p_l > 1e9);
}

TEST_CASE("gradient signs at interior points") {
    const bdpo::LossSpec specs[] = {bdpo::LossSpec::dpo(0.1), bdpo::LossSpec::dpop(0.1, 5.0),
                                    bdpo::LossSpec::dpo_nll(0.1, 1.0),
                                    bdpo::LossSpec::bdpo(0.1, 0.5)};
    bdpo::SplitMix64 rng(20);
    for (const auto& spec : specs) {
        for (int i = 0; i < 200; ++i) {
            const bdpo::PairPoint pt = random_point(rng);
            const auto grad = bdpo::analytic_gradient(pt, spec);
            CHECK(grad.d_p_l >= 0.0);
            CHECK(grad.d_p_w <= 0.0);
        }
    }
}

TEST_CASE("analytic gradient frozen reference-point values") {
    const bdpo::PairPoint ref{0.4, 0.1, 0.4, 0.1};
    const auto g_dpo = bdpo::analytic_gradient(ref, bdpo::LossSpec::dpo(0.1));
    CHECK(g_dpo.d_p_l == doctest::Approx(0.5).epsilon(1e-14));
    const auto g_bdpo = bdpo::analytic_gradient(ref, bdpo::LossSpec::bdpo(0.1, 0.5));
    CHECK(g_bdpo.d_p_l == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("analytic gradient matches central finite differences") {
    const auto report = bdpo::verify_gradients(250, 99);
    for (const auto& entry : report.losses) {
        INFO(bdpo::to_string(entry.kind), " max rel err ", entry.max_rel_err);
        CHECK(entry.pass);
    }
    CHECK(report.pass);
}

TEST_CASE("nll_coefficient examples and alpha dominance") {
    const bdpo::LossSpec spec = bdpo::LossSpec::dpo_nll(0.1, 1.0);
    const bdpo::PairPoint ref{0.4, 0.1, 0.4, 0.1};
    CHECK(bdpo::nll_coefficient(ref, spec) == doctest::Approx(1.05).epsilon(1e-14));
    // Coefficient tends to alpha as the rejected score falls far below the
    // chosen score.
    CHECK(bdpo::nll_coefficient({0.9, 1e-300, 0.4, 0.1}, spec) ==
          doctest::Approx(1.0).epsilon(1e-6));
    // The alpha part outweighs the sigmoid part by at least 1/beta = 10.
    bdpo::SplitMix64 rng(21);
    for (int i = 0; i < 500; ++i) {
        const bdpo::PairPoint pt = random_point(rng);
        const double coeff = bdpo::nll_coefficient(pt, spec);
        const double dpo_part = coeff - spec.alpha;
        CHECK(spec.alpha / dpo_part >= 10.0);
    }
    CHECK_THROWS_AS(bdpo::nll_coefficient(ref, bdpo::LossSpec::dpo(0.1)),
                    std::invalid_argument);
}

TEST_CASE("domain errors are typed, never NaN") {
    const bdpo::LossSpec specs[] = {bdpo::LossSpec::dpo(0.1), bdpo::LossSpec::dpop(0.1, 5.0),
                                    bdpo::LossSpec::dpo_nll(0.1, 1.0),
                                    bdpo::LossSpec::bdpo(0.1, 0.5)};
    for (const auto& spec : specs) {
        CHECK_THROWS_AS(bdpo::loss({0.0, 0.1, 0.4, 0.1}, spec), bdpo::DomainError);
        CHECK_THROWS_AS(bdpo::loss({0.4, 0.1, 0.0, 0.1}, spec), bdpo::DomainError);
        CHECK_THROWS_AS(bdpo::loss({0.4, 0.1, 0.4, 0.0}, spec), bdpo::DomainError);
        if (spec.kind != bdpo::LossKind::Bdpo)
            CHECK_THROWS_AS(bdpo::loss({0.4, 0.0, 0.4, 0.1}, spec), bdpo::DomainError);
    }
}

TEST_CASE("loss spec validation and name round-trip") {
    CHECK_THROWS_AS(bdpo::LossSpec::dpo(0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bdpo::LossSpec::bdpo(0.1, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bdpo::LossSpec::bdpo(0.1, 0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bdpo::loss_kind_from_string("nope"), std::invalid_argument);
    for (const auto kind : {bdpo::LossKind::Dpo, bdpo::LossKind::Dpop,
                            bdpo::LossKind::DpoNll, bdpo::LossKind::Bdpo})
        CHECK(bdpo::loss_kind_from_string(bdpo::to_string(kind)) == kind);
}

TEST_CASE("neg_log_sigmoid is stable for large arguments") {
    CHECK(std::isfinite(bdpo::neg_log_sigmoid(-1000.0)));
    CHECK(bdpo::neg_log_sigmoid(-1000.0) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(bdpo::neg_log_sigmoid(1000.0) >= 0.0);
    CHECK(bdpo::neg_log_sigmoid(0.0) == doctest::Approx(kLn2).epsilon(1e-15));
}
