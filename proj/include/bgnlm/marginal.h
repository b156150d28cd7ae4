#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/feature.h"
#include "bgnlm/glm.h"

namespace bgnlm {

/// Stored in place of any non-finite log posterior.
inline constexpr double kCritFloor = -10000.0;

enum class ComplexityMeasure { Oc, Width, Depth };

const char* to_string(ComplexityMeasure m);
ComplexityMeasure complexity_measure_from_string(const std::string& s);

struct BetaPrior {
    std::string type = "g-prior";
    double g = 0.0;  // <= 0 selects max(n, p^2)
    // Free hyperparameters for the CH, TG and tCCH rows.
    double a = 1.0, b = 2.0, rho = 0.0, s = 0.0, v = 1.0, k = 1.0;
};

struct ModelPrior {
    std::string type = "default";  // "default" or "logic"
    double r = 0.0;                // <= 0 selects 1/n
    ComplexityMeasure measure = ComplexityMeasure::Oc;
    int p = 0;                     // logic prior: number of leaves available; 0 selects the covariate count
};

struct EvaluatorParams {
    Family family = Family::Gaussian;
    std::string custom;  // compiled-in evaluator name when family == Custom
    BetaPrior beta_prior;
    ModelPrior model_prior;
    std::map<std::string, double> extra;
    bool sub = false;
    int p_original = 0;  // number of original covariates
};

struct FitResult {
    double crit = kCritFloor;
    Eigen::VectorXd coefs;  // one entry per included design column, intercept first
};

/// Design matrix of one population together with precomputed cross products.
///
/// Column layout: [intercept (when enabled)] [fixed covariates] [population features].
/// The centered Gram matrix lets Gaussian models be scored without touching the full
/// n x k submatrix more than once.
class DesignContext {
public:
    DesignContext(Eigen::VectorXd y, Eigen::MatrixXd x, bool intercept, int fixed);

    struct LinearFit {
        Eigen::VectorXd coefs;  // aligned with the requested columns
        int rank = 0;           // including the intercept
        double rss = 0.0;
        double r2 = 0.0;
    };

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::MatrixXd& x() const { return x_; }
    Eigen::Index n() const { return y_.size(); }
    Eigen::Index cols() const { return x_.cols(); }
    bool intercept() const { return intercept_; }
    int fixed() const { return fixed_; }
    /// Number of leading always-included columns (intercept plus fixed).
    int forced() const { return (intercept_ ? 1 : 0) + fixed_; }
    double tss() const { return tss_; }

    /// Least squares on the given columns via the Gram matrix and an incremental Cholesky
    /// factorization; dependent columns are dropped with coefficient 0.
    LinearFit linear_fit(std::span<const Eigen::Index> columns) const;

    Eigen::MatrixXd submatrix(std::span<const Eigen::Index> columns) const;

    static std::vector<Eigen::Index> included(const std::vector<bool>& model);

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    bool intercept_;
    int fixed_;
    double ybar_ = 0.0;
    double tss_ = 0.0;
    Eigen::VectorXd xbar_;
    Eigen::MatrixXd gram_;  // centered when the intercept is present
    Eigen::VectorXd xty_;
};

/// log p(Y|m) under Zellner's g-prior up to a constant shared by all models.
double mloglik_gprior_gaussian(double r2, double n, double k, double g);

/// max(n, p^2) with p the number of original covariates.
double default_g(double n, double p);

/// loglik - 0.5 * p_m * log(n).
double mloglik_bic(double loglik, double n, double p_m);

/// Hyperparameters (a, b, rho, s, v, k) of a tCCH prior on u = 1/(1+g).
struct TcchParams {
    double a, b, rho, s, v, k;
};

bool is_tcch_row(const std::string& name);

/// Resolves a named row of the prior table. Throws UnsupportedPrior for reserved names.
TcchParams resolve_tcch_row(const std::string& name, double n, double p_m, double p_original,
                            const BetaPrior& user = {});

/// log of the integral of exp(log_bf(u, log u)) against the normalized tCCH density, by
/// adaptive Gauss-Kronrod quadrature in log coordinates. Improper priors (a <= 0 or b <= 0)
/// are used unnormalized. Throws QuadratureNotConverged.
double tcch_log_integral(const std::function<double(double, double)>& log_bf, const TcchParams& prior,
                         double rel_tol = 1e-8);

/// Gaussian log marginal likelihood (relative to the null model) under a tCCH prior.
double mloglik_tcch_gaussian(double r2, double n, double p_m, const TcchParams& prior);

double log_model_prior_default(std::span<const Complexity> complexities, double r,
                               ComplexityMeasure measure = ComplexityMeasure::Oc);

double log_model_prior_logic(std::span<const int> widths, double p);

/// Model prior selected by params (default or logic).
double log_model_prior(std::span<const Complexity> complexities, const EvaluatorParams& params, double n);

/// Plug-in evaluator contract: design context, inclusion vector over all design columns,
/// complexities of the included population features, parameters.
using CustomEvaluator = std::function<FitResult(const DesignContext&, const std::vector<bool>&,
                                                std::span<const Complexity>, const EvaluatorParams&)>;

/// Registers a compiled-in evaluator. Throws DuplicateName.
void register_evaluator(const std::string& name, CustomEvaluator fn);
bool has_evaluator(const std::string& name);
std::vector<std::string> evaluator_names();

/// Jeffreys prior with unknown variance plus the logic-regression tree prior.
FitResult logic_regression_evaluator(const DesignContext& ctx, const std::vector<bool>& model,
                                     std::span<const Complexity> complexities, const EvaluatorParams& params);

/// Scores one model. Never throws for numerical trouble: failures and non-finite values
/// yield crit = kCritFloor.
FitResult evaluate_model(const DesignContext& ctx, const std::vector<bool>& model,
                         std::span<const Complexity> complexities, const EvaluatorParams& params);

}  // namespace bgnlm
