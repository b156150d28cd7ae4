#include <cmath>

#include <gtest/gtest.h>

#include "bgnlm/marginal.h"
#include "bgnlm/rng.h"
#include "bgnlm/subsample.h"

using namespace bgnlm;

namespace {

struct Logistic {
    Eigen::VectorXd y;
    Eigen::MatrixXd d;  // intercept first
};

Logistic simulate_logistic(int n, std::uint64_t seed) {
    Rng rng(seed);
    Logistic out{Eigen::VectorXd(n), Eigen::MatrixXd(n, 4)};
    for (int i = 0; i < n; ++i) {
        out.d(i, 0) = 1.0;
        for (int j = 1; j < 4; ++j) out.d(i, j) = rng.normal();
        const double eta = -0.5 + 1.2 * out.d(i, 1) - 0.8 * out.d(i, 2);
        out.y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
    }
    return out;
}

EvaluatorParams binomial_bic() {
    EvaluatorParams p;
    p.family = Family::Binomial;
    p.beta_prior.type = "Jeffreys-BIC";
    p.sub = true;
    p.p_original = 3;
    return p;
}

}  // namespace

TEST(Subsample, ScheduleFromExtraParams) {
    EvaluatorParams p;
    p.extra = {{"subs", 0.2}, {"irls_steps", 5}, {"sgd_steps", 7}, {"lr", 0.01}, {"decay", 0.5}};
    const auto s = SubsampleParams::from(p);
    EXPECT_DOUBLE_EQ(s.fraction, 0.2);
    EXPECT_EQ(s.irls_steps, 5);
    EXPECT_EQ(s.sgd_steps, 7);
    EXPECT_DOUBLE_EQ(s.learning_rate, 0.01);
    EXPECT_DOUBLE_EQ(s.decay, 0.5);
    const auto d = SubsampleParams::from(EvaluatorParams{});
    EXPECT_DOUBLE_EQ(d.fraction, 0.05);
}

TEST(Subsample, FullFractionEqualsIrls) {
    const auto data = simulate_logistic(400, 1);
    DesignContext ctx(data.y, data.d, true, 0);
    const std::vector<bool> model{true, true, true, false};
    const std::vector<Complexity> cx(2);
    auto params = binomial_bic();
    SubsampleParams schedule;
    schedule.fraction = 1.0;
    SubsampleState state;
    Rng rng(5);
    const auto sub = evaluate_model_subsampled(ctx, model, cx, params, schedule, state, rng);
    const auto full = evaluate_model(ctx, model, cx, params);
    EXPECT_NEAR(sub.crit, full.crit, 1e-6);
    EXPECT_EQ(state.visits, 1);
}

TEST(Subsample, RunningMaxIsNondecreasingAndBounded) {
    const auto data = simulate_logistic(1000, 2);
    DesignContext ctx(data.y, data.d, true, 0);
    const std::vector<bool> model{true, true, true, true};
    const std::vector<Complexity> cx(3);
    auto params = binomial_bic();
    SubsampleParams schedule;
    schedule.fraction = 0.05;
    SubsampleState state;
    Rng rng(6);
    const double full = evaluate_model(ctx, model, cx, params).crit;
    double prev = -std::numeric_limits<double>::infinity();
    for (int visit = 0; visit < 30; ++visit) {
        const double c = evaluate_model_subsampled(ctx, model, cx, params, schedule, state, rng).crit;
        EXPECT_TRUE(std::isfinite(c));
        EXPECT_GE(c, prev);
        // The full-data mode maximizes the likelihood, so no coefficient vector can beat it.
        EXPECT_LE(c, full + 1e-9);
        prev = c;
    }
    EXPECT_EQ(state.visits, 30);
}

TEST(Subsample, NullModelIsFinite) {
    const auto data = simulate_logistic(300, 3);
    DesignContext ctx(data.y, data.d, true, 0);
    SubsampleState state;
    Rng rng(7);
    const auto r = evaluate_model_subsampled(ctx, {true, false, false, false}, {}, binomial_bic(), SubsampleParams{}, state, rng);
    EXPECT_TRUE(std::isfinite(r.crit));
    EXPECT_GT(r.crit, kCritFloor);
}
