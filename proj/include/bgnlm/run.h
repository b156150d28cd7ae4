#pragma once

#include "bgnlm/archive.h"
#include "bgnlm/config.h"
#include "bgnlm/dataset.h"
#include "bgnlm/parallel.h"

namespace bgnlm {

/// Validates the configuration against the data, runs the selected sampler and packages the
/// result. Throws ConfigError, AllRunsFailed and data errors.
Archive run_fit(const RunConfig& config, const Dataset& data, const TransformRegistry& transforms,
                const SchedulerHook& hook = {});

}  // namespace bgnlm
