#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "capd/diffusion/kernels.hpp"
#include "capd/diffusion/schedule.hpp"
#include "oracles.hpp"

using namespace capd;
using namespace capd::diffusion;

namespace {

ScheduleConfig constant_rates(std::size_t T, double beta, double gamma) {
    ScheduleConfig c;
    c.steps = T;
    c.gamma_curve = GammaCurve::constant;
    c.beta = beta;
    c.gamma = gamma;
    return c;
}

void expect_column_stochastic(const Matrix& m, double tol) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        EXPECT_NEAR(m.col(c).sum(), 1.0, tol);
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            EXPECT_GE(m(r, c), 0.0);
            EXPECT_LE(m(r, c), 1.0 + tol);
        }
    }
}

seq::TokenSequence tokens(std::initializer_list<int> v) {
    seq::TokenSequence ts;
    for (int x : v) ts.tokens.push_back(static_cast<seq::Token>(x));
    return ts;
}

}  // namespace

TEST(Schedule, IdentityWhenNoNoise) {
    const auto s = build_schedule(1, 5, constant_rates(1, 0.0, 0.0));
    EXPECT_TRUE(s.step(1).isApprox(Matrix::Identity(5, 5), 0.0));
    EXPECT_TRUE(s.cumulative(1).isApprox(Matrix::Identity(5, 5), 0.0));
}

TEST(Schedule, FullAbsorptionInOneStep) {
    const auto s = build_schedule(1, 4, constant_rates(1, 0.0, 1.0));
    for (Eigen::Index c = 0; c < 4; ++c) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
        e(3) = 1.0;
        EXPECT_EQ(s.step(1).col(c), e);
    }
}

TEST(Schedule, CumulativeMatchesExplicitProduct) {
    const auto s = build_schedule(3, 4, constant_rates(3, 0.05, 0.1));
    const auto q = oracle::step_matrix(4, 0.05, 0.1);
    const auto product = oracle::multiply(q, oracle::multiply(q, q));
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            EXPECT_NEAR(s.cumulative(3)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), product[r][c], 1e-12);
}

TEST(Schedule, InvariantsOfDefaultSchedule) {
    const auto s = build_schedule(22, ScheduleConfig{});
    ASSERT_EQ(s.steps(), 100u);
    const double K = 22;
    for (std::size_t t = 1; t <= s.steps(); ++t) {
        expect_column_stochastic(s.step(t), 1e-12);
        expect_column_stochastic(s.cumulative(t), 1e-12);
        EXPECT_NEAR(s.alpha(t) + (K - 1) * s.beta(t) + s.gamma(t), 1.0, 1e-12);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(22);
        e(21) = 1.0;
        EXPECT_EQ(s.step(t).col(21), e);
    }
    for (double tv : absorption_gap(s)) EXPECT_LT(tv, 1e-3);
}

TEST(Schedule, LinearCurveAlsoAbsorbs) {
    ScheduleConfig c;
    c.steps = 20;
    c.gamma_curve = GammaCurve::linear;
    const auto s = build_schedule(6, c);
    for (double tv : absorption_gap(s)) EXPECT_LT(tv, 1e-3);
}

TEST(Schedule, InfeasibleRatesRejected) {
    try {
        build_schedule(2, 4, constant_rates(2, 0.3, 0.2));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible schedule"), std::string::npos);
    }
    EXPECT_THROW(build_schedule(2, 2, constant_rates(2, 0.0, 0.0)), ConfigError);
}

TEST(Schedule, JsonConfig) {
    const auto c = ScheduleConfig::from_json(nlohmann::json::parse(R"({"T":100,"beta":0.0025,"gamma_curve":"cosine"})"));
    EXPECT_EQ(c.steps, 100u);
    EXPECT_DOUBLE_EQ(c.beta, 0.0025);
    EXPECT_THROW(ScheduleConfig::from_json(nlohmann::json::parse(R"({"gamma_curve":"sigmoid"})")), ConfigError);
}

TEST(Marginal, IdentityScheduleGivesOneHot) {
    const auto s = build_schedule(2, 4, constant_rates(2, 0.0, 0.0));
    const auto m = marginal(s, tokens({0, 2, 1}), 2);
    EXPECT_EQ(m(0, 0), 1.0);
    EXPECT_EQ(m(1, 2), 1.0);
    EXPECT_EQ(m(2, 1), 1.0);
    EXPECT_DOUBLE_EQ(m.sum(), 3.0);
}

TEST(Marginal, FullyAbsorbedAtFinalStep) {
    const auto s = build_schedule(22, ScheduleConfig{});
    const auto m = marginal(s, tokens({0, 5, 20}), s.steps());
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(m(i, 21), 1.0, 1e-12);
}

TEST(Marginal, MatchesEnumeratedChain) {
    const std::vector<double> beta{0.07, 0.04}, gamma{0.1, 0.3};
    const auto s = TransitionSchedule::from_rates(4, beta, gamma);
    const auto chain = oracle::Chain::from_rates(4, beta, gamma);
    for (int x0 = 0; x0 < 3; ++x0) {
        const auto m = marginal(s, tokens({x0}), 2);
        const auto ref = chain.marginal(static_cast<std::size_t>(x0), 2);
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(m(0, k), ref[static_cast<std::size_t>(k)], 1e-12);
    }
}

TEST(Marginal, RejectsBadInputs) {
    const auto s = build_schedule(3, 4, constant_rates(3, 0.05, 0.1));
    EXPECT_THROW(marginal(s, tokens({0}), 0), DataError);
    EXPECT_THROW(marginal(s, tokens({0}), 4), DataError);
    EXPECT_THROW(marginal(s, tokens({3}), 1), DataError);
}

TEST(ForwardSample, DegenerateSchedules) {
    Rng rng(1);
    const auto id = build_schedule(2, 4, constant_rates(2, 0.0, 0.0));
    const auto x0 = tokens({0, 1, 2, 1});
    EXPECT_EQ(forward_sample(id, x0, 2, rng), x0);
    const auto full = build_schedule(22, ScheduleConfig{});
    EXPECT_EQ(forward_sample(full, tokens({0, 3, 20}), full.steps(), rng), tokens({21, 21, 21}));
}

TEST(ForwardSample, FrequenciesMatchMarginal) {
    const auto s = build_schedule(3, 4, constant_rates(3, 0.08, 0.15));
    Rng rng(77);
    const auto x0 = tokens({1});
    std::vector<double> freq(4, 0.0);
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) freq[forward_sample(s, x0, 3, rng)[0]] += 1.0 / draws;
    const auto m = marginal(s, x0, 3);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(freq[static_cast<std::size_t>(k)], m(0, k), 0.01);
}

TEST(Posterior, IdentityFirstStepIsOneHotOnX0) {
    const auto s = TransitionSchedule::from_rates(4, {0.0, 0.1}, {0.0, 0.2});
    for (std::size_t x0 = 0; x0 < 3; ++x0) {
        for (std::size_t xt = 0; xt < 4; ++xt) {
            if (xt != x0 && xt != 3 && s.step(2)(static_cast<Eigen::Index>(xt), static_cast<Eigen::Index>(x0)) == 0.0) continue;
            const auto p = posterior(s, xt, x0, 2);
            EXPECT_NEAR(p(static_cast<Eigen::Index>(x0)), 1.0, 1e-12);
        }
    }
}

TEST(Posterior, ModeAtSharedStateForNearIdentityChain) {
    const auto s = build_schedule(3, 6, constant_rates(3, 0.01, 0.01));
    for (std::size_t st = 0; st < 5; ++st) {
        const auto p = posterior(s, st, st, 2);
        Eigen::Index arg;
        p.maxCoeff(&arg);
        EXPECT_EQ(static_cast<std::size_t>(arg), st);
    }
}

TEST(Posterior, MatchesJointEnumeration) {
    const std::vector<double> beta{0.05, 0.08, 0.02}, gamma{0.1, 0.2, 0.4};
    const auto s = TransitionSchedule::from_rates(4, beta, gamma);
    const auto chain = oracle::Chain::from_rates(4, beta, gamma);
    int combos = 0;
    for (std::size_t t = 2; t <= 3; ++t)
        for (std::size_t x0 = 0; x0 < 3; ++x0)
            for (std::size_t xt = 0; xt < 4; ++xt) {
                const auto ref = chain.posterior(xt, x0, t);
                ASSERT_FALSE(ref.empty());
                const auto p = posterior(s, xt, x0, t);
                for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p(static_cast<Eigen::Index>(j)), ref[j], 1e-12);
                EXPECT_NEAR(p.sum(), 1.0, 1e-12);
                ++combos;
            }
    EXPECT_EQ(combos, 24);
}

TEST(Posterior, MarginalisingJointRecoversPreviousMarginal) {
    const auto s = build_schedule(5, 5, constant_rates(5, 0.04, 0.12));
    for (std::size_t t = 2; t <= 5; ++t)
        for (std::size_t x0 = 0; x0 < 4; ++x0) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(5);
            for (std::size_t xt = 0; xt < 5; ++xt)
                acc += posterior(s, xt, x0, t) * s.cumulative(t)(static_cast<Eigen::Index>(xt), static_cast<Eigen::Index>(x0));
            const Eigen::VectorXd prev = s.cumulative(t - 1).col(static_cast<Eigen::Index>(x0));
            EXPECT_LT((acc - prev).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(Posterior, Errors) {
    const auto s = TransitionSchedule::from_rates(4, {0.0, 0.0}, {0.0, 0.5});
    EXPECT_THROW(posterior(s, 0, 0, 1), DataError);
    try {
        posterior(s, 1, 0, 2);  // pure absorbing chain cannot turn 0 into 1
        FAIL();
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "inconsistent (x_t, x_0) pair");
    }
}

TEST(ReverseStep, OneHotX0ReproducesPosterior) {
    const auto s = build_schedule(4, 4, constant_rates(4, 0.05, 0.1));
    const auto xt = tokens({0, 3, 2});
    const seq::Token x0[] = {1, 0, 2};
    Distributions p = Distributions::Zero(3, 3);
    for (int i = 0; i < 3; ++i) p(i, x0[i]) = 1.0;
    const auto out = reverse_step(s, xt, p, 3);
    for (int i = 0; i < 3; ++i) {
        const auto ref = posterior(s, xt[static_cast<std::size_t>(i)], x0[i], 3);
        EXPECT_LT((out.row(i).transpose() - ref).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(ReverseStep, UniformX0AveragesEnumeratedPosteriors) {
    const std::vector<double> beta{0.05, 0.06, 0.03}, gamma{0.1, 0.2, 0.3};
    const auto s = TransitionSchedule::from_rates(4, beta, gamma);
    const auto chain = oracle::Chain::from_rates(4, beta, gamma);
    Distributions p = Distributions::Constant(1, 3, 1.0 / 3.0);
    for (int xt = 0; xt < 4; ++xt) {
        const auto out = reverse_step(s, tokens({xt}), p, 3);
        for (std::size_t j = 0; j < 4; ++j) {
            double ref = 0.0;
            for (std::size_t x0 = 0; x0 < 3; ++x0) ref += chain.posterior(static_cast<std::size_t>(xt), x0, 3)[j] / 3.0;
            EXPECT_NEAR(out(0, static_cast<Eigen::Index>(j)), ref, 1e-12);
        }
    }
}

TEST(ReverseStep, RowsNormalised) {
    const auto s = build_schedule(22, ScheduleConfig{});
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t t = 1 + rng.below(s.steps());
        seq::TokenSequence xt(4, 0);
        // a data token cannot survive to t = T
        for (auto& x : xt.tokens) x = t == s.steps() ? 21 : static_cast<seq::Token>(rng.below(22));
        Distributions p(4, 21);
        for (Eigen::Index i = 0; i < 4; ++i) {
            for (Eigen::Index k = 0; k < 21; ++k) p(i, k) = rng.uniform();
            p.row(i) /= p.row(i).sum();
        }
        const auto out = reverse_step(s, xt, p, t);
        for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(out.row(i).sum(), 1.0, 1e-10);
    }
}

TEST(ReverseStep, FirstStepReturnsPrediction) {
    const auto s = build_schedule(3, 4, constant_rates(3, 0.05, 0.1));
    Distributions p(1, 3);
    p << 0.2, 0.5, 0.3;
    const auto out = reverse_step(s, tokens({3}), p, 1);
    EXPECT_EQ(out(0, 1), 0.5);
    EXPECT_EQ(out(0, 3), 0.0);
}

TEST(ReverseStep, MalformedInputRejected) {
    const auto s = build_schedule(3, 4, constant_rates(3, 0.05, 0.1));
    Distributions bad(1, 3);
    bad << 0.5, 0.5, 0.5;
    EXPECT_THROW(reverse_step(s, tokens({0}), bad, 2), DataError);
    Distributions wrong_shape = Distributions::Constant(1, 4, 0.25);
    EXPECT_THROW(reverse_step(s, tokens({0}), wrong_shape, 2), DataError);
}

TEST(ExactMath, CompositionMatchesSingleStepEnumeration) {
    Rng rng(8);
    for (std::size_t K = 3; K <= 6; ++K)
        for (std::size_t T = 1; T <= 5; ++T) {
            std::vector<double> beta(T), gamma(T);
            for (std::size_t t = 0; t < T; ++t) {
                beta[t] = 0.2 / static_cast<double>(K) * rng.uniform();
                gamma[t] = 0.3 * rng.uniform();
            }
            const auto s = TransitionSchedule::from_rates(K, beta, gamma);
            const auto chain = oracle::Chain::from_rates(K, beta, gamma);
            for (std::size_t x0 = 0; x0 + 1 < K; ++x0) {
                const auto ref = chain.marginal(x0, T);
                for (std::size_t k = 0; k < K; ++k)
                    EXPECT_NEAR(s.cumulative(T)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(x0)), ref[k], 1e-12);
            }
        }
}
