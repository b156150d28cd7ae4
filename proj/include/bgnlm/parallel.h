#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/gmjmcmc.h"
#include "bgnlm/transforms.h"

namespace bgnlm {

enum class Method { Mjmcmc, Gmjmcmc, MjmcmcParallel, GmjmcmcParallel };

const char* to_string(Method m);
Method method_from_string(const std::string& s);
bool is_parallel(Method m);
bool is_genetic(Method m);

struct RunPlan {
    int runs = 1;
    int cores = 1;
    std::uint64_t seed = 0;
    Method method = Method::Mjmcmc;
    bool verbose = false;
};

/// Called with (run index, true) when a run starts and (run index, false) when it ends.
using SchedulerHook = std::function<void(int, bool)>;

struct RunOutcome {
    std::vector<GmjResult> results;  // successful runs in run order
    std::vector<int> run_ids;        // original index of each entry in results
    std::vector<std::string> failures;
    int failed = 0;
};

/// Runs independent chains on at most `cores` worker threads. Run i draws from Rng(seed, i),
/// so the output does not depend on the worker count. Non-parallel methods use one run.
/// Throws AllRunsFailed.
RunOutcome execute(const RunPlan& plan, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const TransformRegistry& transforms, const GmjSettings& settings,
                   const SchedulerHook& hook = {});

}  // namespace bgnlm
