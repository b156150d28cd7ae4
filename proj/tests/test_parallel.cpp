#include <atomic>
#include <mutex>

#include <gtest/gtest.h>

#include "bgnlm/dataset.h"
#include "bgnlm/errors.h"
#include "bgnlm/parallel.h"
#include "bgnlm/results.h"

using namespace bgnlm;

namespace {

GmjSettings small_settings() {
    GmjSettings s;
    s.P = 3;
    s.N = 60;
    s.probs.gen.transforms = {"sigmoid", "p0", "troot"};
    s.eval.p_original = 20;
    return s;
}

// Everything that must match between two executions.
std::vector<std::string> fingerprint(const RunOutcome& out) {
    std::vector<std::string> fp;
    for (std::size_t r = 0; r < out.results.size(); ++r) {
        fp.push_back("run " + std::to_string(out.run_ids[r]));
        for (const auto& g : out.results[r].generations) {
            for (const auto& f : g.population.features) fp.push_back(f.key());
            for (const auto& [k, rec] : g.chain.models) fp.push_back(k.to_string() + " " + format_number(rec.crit));
        }
    }
    return fp;
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
    for (Method m : {Method::Mjmcmc, Method::Gmjmcmc, Method::MjmcmcParallel, Method::GmjmcmcParallel}) {
        EXPECT_EQ(method_from_string(to_string(m)), m);
    }
    EXPECT_THROW(method_from_string("bogus"), ConfigError);
    EXPECT_TRUE(is_parallel(Method::GmjmcmcParallel));
    EXPECT_FALSE(is_genetic(Method::MjmcmcParallel));
}

TEST(Execute, SingleRunMatchesDirectCall) {
    const auto data = simulate_dataset("interaction", 200, 1);
    const auto reg = TransformRegistry::builtin();
    const auto settings = small_settings();
    RunPlan plan;
    plan.method = Method::GmjmcmcParallel;
    plan.runs = 1;
    plan.seed = 42;
    const auto out = execute(plan, data.x, data.y, reg, settings);
    Rng rng(42, 0);
    RunOutcome direct;
    direct.results.push_back(run_gmjmcmc(data.x, data.y, reg, settings, rng));
    direct.run_ids.push_back(0);
    EXPECT_EQ(fingerprint(out), fingerprint(direct));
}

TEST(Execute, IndependentOfCoreCount) {
    const auto data = simulate_dataset("interaction", 200, 2);
    const auto reg = TransformRegistry::builtin();
    RunPlan plan;
    plan.method = Method::GmjmcmcParallel;
    plan.runs = 5;
    plan.seed = 7;
    plan.cores = 1;
    const auto one = fingerprint(execute(plan, data.x, data.y, reg, small_settings()));
    for (int cores : {2, 4}) {
        plan.cores = cores;
        EXPECT_EQ(fingerprint(execute(plan, data.x, data.y, reg, small_settings())), one) << cores;
    }
    EXPECT_EQ(fingerprint(execute(plan, data.x, data.y, reg, small_settings())), one);
}

TEST(Execute, ConcurrencyNeverExceedsCores) {
    const auto data = simulate_dataset("linear", 100, 3);
    const auto reg = TransformRegistry::builtin();
    for (int cores : {1, 2, 3}) {
        std::atomic<int> active{0}, peak{0}, started{0};
        RunPlan plan;
        plan.method = Method::MjmcmcParallel;
        plan.runs = 6;
        plan.cores = cores;
        const SchedulerHook hook = [&](int, bool start) {
            if (start) {
                ++started;
                const int now = ++active;
                int p = peak.load();
                while (now > p && !peak.compare_exchange_weak(p, now)) {
                }
            } else {
                --active;
            }
        };
        const auto out = execute(plan, data.x, data.y, reg, small_settings(), hook);
        EXPECT_LE(peak.load(), cores);
        EXPECT_EQ(started.load(), 6);
        EXPECT_EQ(active.load(), 0);
        EXPECT_EQ(out.results.size(), 6u);
    }
}

TEST(Execute, NonParallelMethodsRunOnce) {
    const auto data = simulate_dataset("linear", 100, 4);
    const auto reg = TransformRegistry::builtin();
    RunPlan plan;
    plan.method = Method::Gmjmcmc;
    plan.runs = 4;
    plan.cores = 2;
    const auto out = execute(plan, data.x, data.y, reg, small_settings());
    EXPECT_EQ(out.results.size(), 1u);
}

namespace {

std::atomic<int> g_calls{0};
std::atomic<int> g_fail_first{0};

FitResult flaky(const DesignContext& ctx, const std::vector<bool>& model, std::span<const Complexity> cx,
                const EvaluatorParams& params) {
    if (g_calls.fetch_add(1) < g_fail_first.load()) throw UnsupportedPrior("injected failure");
    EvaluatorParams plain = params;
    plain.family = Family::Gaussian;
    return evaluate_model(ctx, model, cx, plain);
}

}  // namespace

TEST(Execute, FailedRunsAreRecorded) {
    static const bool registered = (register_evaluator("test-flaky", &flaky), true);
    (void)registered;
    const auto data = simulate_dataset("linear", 100, 5);
    const auto reg = TransformRegistry::builtin();
    auto settings = small_settings();
    settings.eval.family = Family::Custom;
    settings.eval.custom = "test-flaky";
    RunPlan plan;
    plan.method = Method::MjmcmcParallel;
    plan.runs = 3;
    plan.cores = 1;
    g_calls = 0;
    g_fail_first = 1;
    const auto out = execute(plan, data.x, data.y, reg, settings);
    EXPECT_EQ(out.failed, 1);
    EXPECT_EQ(out.results.size(), 2u);
    EXPECT_EQ(out.run_ids, (std::vector<int>{1, 2}));
    ASSERT_EQ(out.failures.size(), 1u);
    EXPECT_NE(out.failures[0].find("injected failure"), std::string::npos);

    g_calls = 0;
    g_fail_first = 1 << 30;
    EXPECT_THROW(execute(plan, data.x, data.y, reg, settings), AllRunsFailed);
    g_fail_first = 0;
}

TEST(Execute, ConfigErrorsAbort) {
    const auto data = simulate_dataset("linear", 50, 6);
    const auto reg = TransformRegistry::builtin();
    RunPlan plan;
    plan.runs = 0;
    EXPECT_THROW(execute(plan, data.x, data.y, reg, small_settings()), ConfigError);
    plan.runs = 2;
    plan.cores = 0;
    EXPECT_THROW(execute(plan, data.x, data.y, reg, small_settings()), ConfigError);
}
