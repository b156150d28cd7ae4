#include "bgnlm/parallel.h"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "bgnlm/errors.h"

namespace bgnlm {

const char* to_string(Method m) {
    switch (m) {
        case Method::Mjmcmc: return "mjmcmc";
        case Method::Gmjmcmc: return "gmjmcmc";
        case Method::MjmcmcParallel: return "mjmcmc.parallel";
        case Method::GmjmcmcParallel: return "gmjmcmc.parallel";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "mjmcmc") return Method::Mjmcmc;
    if (s == "gmjmcmc") return Method::Gmjmcmc;
    if (s == "mjmcmc.parallel") return Method::MjmcmcParallel;
    if (s == "gmjmcmc.parallel") return Method::GmjmcmcParallel;
    throw ConfigError("unknown method '" + s + "'");
}

bool is_parallel(Method m) { return m == Method::MjmcmcParallel || m == Method::GmjmcmcParallel; }
bool is_genetic(Method m) { return m == Method::Gmjmcmc || m == Method::GmjmcmcParallel; }

RunOutcome execute(const RunPlan& plan, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const TransformRegistry& transforms, const GmjSettings& settings, const SchedulerHook& hook) {
    if (plan.runs < 1) throw ConfigError("runs must be at least 1");
    if (plan.cores < 1) throw ConfigError("cores must be at least 1");
    const int runs = is_parallel(plan.method) ? plan.runs : 1;
    const int workers = std::min(plan.cores, runs);

    std::vector<std::optional<GmjResult>> slots(static_cast<std::size_t>(runs));
    std::vector<std::string> errors(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};
    std::mutex log_mutex;

    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= runs) return;
            if (hook) hook(i, true);
            try {
                Rng rng(plan.seed, static_cast<std::uint64_t>(i));
                slots[static_cast<std::size_t>(i)] = is_genetic(plan.method)
                                                         ? run_gmjmcmc(x, y, transforms, settings, rng)
                                                         : run_mjmcmc_covariates(x, y, transforms, settings, rng);
                if (plan.verbose) {
                    std::lock_guard lock(log_mutex);
                    std::cerr << "run " << i + 1 << "/" << runs << " finished\n";
                }
            } catch (const ConfigError&) {
                if (hook) hook(i, false);
                throw;
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
            if (hook) hook(i, false);
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> thrown(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    work();
                } catch (...) {
                    thrown[static_cast<std::size_t>(w)] = std::current_exception();
                    next.store(runs);
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : thrown) {
            if (e) std::rethrow_exception(e);
        }
    }

    RunOutcome out;
    for (int i = 0; i < runs; ++i) {
        auto& slot = slots[static_cast<std::size_t>(i)];
        if (slot) {
            out.results.push_back(std::move(*slot));
            out.run_ids.push_back(i);
        } else {
            ++out.failed;
            out.failures.push_back("run " + std::to_string(i + 1) + ": " + errors[static_cast<std::size_t>(i)]);
        }
    }
    if (out.results.empty()) {
        throw AllRunsFailed("all " + std::to_string(runs) + " runs failed; first error: " + errors.front());
    }
    return out;
}

}  // namespace bgnlm
