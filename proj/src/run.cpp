#include "bgnlm/run.h"

#include "bgnlm/errors.h"

namespace bgnlm {

Archive run_fit(const RunConfig& config, const Dataset& data, const TransformRegistry& transforms,
                const SchedulerHook& hook) {
    validate_config(config, transforms);
    if (data.y.size() != data.n()) throw ConfigError("training data has no response");
    if (config.settings.fixed > data.p()) throw ConfigError("fixed count exceeds covariate count");
    validate_response(data.y, config.settings.eval.family);

    RunPlan plan = config.plan;
    plan.method = config.method;
    RunOutcome outcome = execute(plan, data.x, data.y, transforms, resolved_settings(config), hook);

    Archive archive;
    archive.config = config;
    archive.response = data.response;
    archive.labels = data.labels;
    archive.runs = std::move(outcome.results);
    archive.run_ids = std::move(outcome.run_ids);
    archive.failures = std::move(outcome.failures);
    return archive;
}

}  // namespace bgnlm
