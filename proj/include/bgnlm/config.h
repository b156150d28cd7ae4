#pragma once

#include <string>

#include <json.hpp>

#include "bgnlm/gmjmcmc.h"
#include "bgnlm/parallel.h"
#include "bgnlm/results.h"
#include "bgnlm/transforms.h"

namespace bgnlm {

struct RunConfig {
    Method method = Method::Mjmcmc;
    RunPlan plan;
    GmjSettings settings;  // settings.probs.gen.transforms holds the transform names
    PopSelector pop = PopSelector::Best;
    bool n_given = false;  // false: N takes the method default (1000 for mjmcmc, 100 otherwise)

    /// Number of MJMCMC iterations per generation after applying the method default.
    long resolved_N() const;
};

/// Structured document with top-level run options and the blocks probs, params, beta_prior,
/// model_prior and extra_params. Every field is optional. Throws ConfigError on unknown keys
/// or ill-typed values.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path);

/// Checks cross-field constraints and transform names. Throws ConfigError.
void validate_config(const RunConfig& config, const TransformRegistry& transforms);

/// Settings passed to the samplers, with N resolved.
GmjSettings resolved_settings(const RunConfig& config);

}  // namespace bgnlm
