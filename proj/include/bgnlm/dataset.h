#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bgnlm {

struct Dataset {
    std::string response;
    std::vector<std::string> labels;  // covariate names after dummy expansion
    Eigen::VectorXd y;
    Eigen::MatrixXd x;                // rows = observations
    int fixed = 0;                    // leading covariates forced into every model
    Eigen::VectorXd mean;             // E[Y|x] for simulated data, empty otherwise

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }
};

struct LoadOptions {
    std::string response;  // empty selects the first column
    bool response_optional = false;  // a named response that is absent leaves y empty
    int fixed = 0;
    bool scale_y = false;  // center and divide by the standard deviation
    bool scale_x = false;  // standardize each column and divide by sqrt(n)
    char delimiter = ',';
};

/// Reads a delimited table with a header row. Non-numeric columns are expanded into dummy
/// indicators for every level but the first (levels sorted). Throws IoError, ParseError and
/// MissingValues.
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});
Dataset parse_dataset(std::istream& in, const LoadOptions& options = {});

void write_dataset(std::ostream& out, const Dataset& data, char delimiter = ',');

/// Reorders columns to match `labels`. Throws MissingCovariate.
Dataset align_covariates(const Dataset& data, const std::vector<std::string>& labels);

/// Applies the scaling selected by options to an already loaded dataset.
void scale_dataset(Dataset& data, bool scale_y, bool scale_x);

Dataset subset_rows(const Dataset& data, Eigen::Index begin, Eigen::Index end);

/// Scenarios: "linear", "interaction", "logic", "kepler-like".
Dataset simulate_dataset(const std::string& scenario, Eigen::Index n, std::uint64_t seed);

/// Noise standard deviation used by each scenario.
double scenario_noise_sd(const std::string& scenario);

}  // namespace bgnlm
