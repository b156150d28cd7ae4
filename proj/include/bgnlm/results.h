#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/feature.h"
#include "bgnlm/gmjmcmc.h"
#include "bgnlm/glm.h"
#include "bgnlm/marginal.h"

namespace bgnlm {

enum class PopSelector { Best, Last, All };

const char* to_string(PopSelector s);
PopSelector pop_selector_from_string(const std::string& s);

struct MergedModel {
    std::string signature;          // sorted canonical feature keys joined by ';'
    std::vector<Feature> features;  // included population features, in design order
    Eigen::VectorXd coefs;          // [intercept][fixed][features]
    double crit = kCritFloor;
    double prob = 0.0;
    int run = 0;
    int generation = 0;
};

struct FeatureInclusion {
    std::string key;
    Feature feature;
    double prob = 0.0;
};

struct MergedResult {
    std::vector<MergedModel> models;         // sorted by signature
    std::vector<FeatureInclusion> features;  // sorted by key
    std::vector<std::vector<double>> best_crit_series;  // one per run
    bool intercept = true;
    int fixed = 0;
};

/// Union of the selected generations' models across runs, deduplicated by signature keeping
/// the largest crit, renormalized over the union.
MergedResult merge_runs(std::span<const GmjResult> runs, PopSelector selector, bool intercept = true, int fixed = 0);

/// Signature of a set of features.
std::string model_signature(std::span<const Feature> features);

/// Smallest value whose cumulative normalized weight reaches `level`.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double level);

struct SummaryRow {
    std::string feature;  // rendered with user labels
    std::string key;
    double prob = 0.0;
    std::vector<double> effects;  // weighted coefficient quantiles, one per level
};

struct Summary {
    std::vector<SummaryRow> rows;  // by probability, descending
    std::vector<double> levels;
    double best_crit = kCritFloor;
    std::vector<double> intercept_effects;
};

Summary summarize(const MergedResult& merged, double tol, std::span<const std::string> labels,
                  std::span<const double> effect_levels = {});

/// Highest crit; ties go to the lexicographically smaller signature.
const MergedModel& best_model(const MergedResult& merged);

/// Median probability model refitted on the full data.
MergedModel mpm_model(const MergedResult& merged, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const TransformRegistry& transforms, const EvaluatorParams& params);

struct PredictionSet {
    Eigen::VectorXd mean;
    std::vector<double> levels;
    Eigen::MatrixXd quantiles;  // rows = observations, cols = levels
};

/// Per-model predictions on new covariate rows.
Eigen::VectorXd predict_model(const MergedModel& model, const Eigen::MatrixXd& x, const TransformRegistry& transforms,
                              bool intercept, int fixed, Family link);

/// Model-averaged prediction. Throws MissingCovariate when x lacks a referenced covariate.
PredictionSet predict_bma(const MergedResult& merged, const Eigen::MatrixXd& x, const TransformRegistry& transforms,
                          Family link = Family::Gaussian, std::span<const double> levels = std::vector<double>{0.025, 0.975});

enum class DiagStatistic { Median, Mean, Min, Max, Var };

DiagStatistic diag_statistic_from_string(const std::string& s);
const char* to_string(DiagStatistic s);

struct DiagnosticPoint {
    int generation = 0;  // 1-based
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Statistic of the per-run best crit per generation, with bands of two rolling standard
/// deviations over the last `window` values.
std::vector<DiagnosticPoint> diagnostics_series(const std::vector<std::vector<double>>& best_crit_series,
                                                DiagStatistic stat, int window = 5);

}  // namespace bgnlm
