#include "bgnlm/subsample.h"

#include <algorithm>
#include <cmath>

namespace bgnlm {

SubsampleParams SubsampleParams::from(const EvaluatorParams& params) {
    SubsampleParams out;
    auto read = [&](const char* key, auto& field) {
        auto it = params.extra.find(key);
        if (it != params.extra.end()) field = static_cast<std::decay_t<decltype(field)>>(it->second);
    };
    read("subs", out.fraction);
    read("irls_steps", out.irls_steps);
    read("sgd_steps", out.sgd_steps);
    read("lr", out.learning_rate);
    read("decay", out.decay);
    out.fraction = std::clamp(out.fraction, 1e-6, 1.0);
    return out;
}

namespace {

std::vector<Eigen::Index> draw_rows(Eigen::Index n, Eigen::Index m, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (m >= n) return idx;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, n - 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// One IRLS (Newton) update computed from the rows in `rows` only.
Eigen::VectorXd subsample_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                 const std::vector<Eigen::Index>& rows) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd xs(m, x.cols());
    Eigen::VectorXd z(m), sw(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        xs.row(i) = x.row(r);
        const double eta = std::clamp(x.row(r).dot(beta), -30.0, 30.0);
        const double mu = 1.0 / (1.0 + std::exp(-eta));
        const double w = std::max(mu * (1.0 - mu), 1e-10);
        z(i) = eta + (y(r) - mu) / w;
        sw(i) = std::sqrt(w);
    }
    Eigen::VectorXd out = rank_revealing_solve(sw.asDiagonal() * xs, sw.cwiseProduct(z));
    for (Eigen::Index j = 0; j < out.size(); ++j) {
        if (!std::isfinite(out(j))) return beta;
    }
    return out;
}

double full_deviance(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x.cols() ? Eigen::VectorXd(x * beta) : Eigen::VectorXd::Zero(y.size());
    return -2.0 * binomial_loglik(y, eta);
}

void offer(SubsampleState& state, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const double dev = full_deviance(x, y, beta);
    if (std::isfinite(dev) && dev < state.best_deviance) {
        state.best_deviance = dev;
        state.best = beta;
    }
}

// Estimates from this many leading first-visit IRLS steps are kept out of the running average.
constexpr int kAverageWarmup = 10;

}  // namespace

FitResult evaluate_model_subsampled(const DesignContext& ctx, const std::vector<bool>& model,
                                    std::span<const Complexity> complexities, const EvaluatorParams& params,
                                    const SubsampleParams& schedule, SubsampleState& state, Rng& rng) {
    const auto cols = DesignContext::included(model);
    const Eigen::MatrixXd x = ctx.submatrix(cols);
    const Eigen::VectorXd& y = ctx.y();
    const Eigen::Index n = ctx.n();
    const Eigen::Index k = x.cols();
    const Eigen::Index m = std::max<Eigen::Index>(
        std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::ceil(schedule.fraction * static_cast<double>(n)))), 1);

    if (state.visits == 0) {
        state.current = Eigen::VectorXd::Zero(k);
        state.average_sum = Eigen::VectorXd::Zero(k);
        if (k > 0) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
            qr.setThreshold(1e-10);
            state.rank = static_cast<int>(qr.rank());
        } else {
            state.rank = 0;
        }
        offer(state, x, y, state.current);

        if (k > 0) {
            // Subsampled IRLS with a fresh row sample per step; step lengths cool after the
            // warm-up so that later estimates mostly average out subsampling noise.
            for (int t = 0; t < schedule.irls_steps; ++t) {
                const auto rows = draw_rows(n, m, rng);
                const Eigen::VectorXd step = subsample_newton(x, y, state.current, rows);
                const double gamma = std::min(1.0, static_cast<double>(kAverageWarmup) / (t + 1));
                state.current += gamma * (step - state.current);
                if (t >= kAverageWarmup) {
                    state.average_sum += step;
                    state.average_count += 1.0;
                }
            }
            offer(state, x, y, state.current);
            if (state.average_count > 0) offer(state, x, y, state.average_sum / state.average_count);

            // SGD refinement on mini-batches of the same size.
            Eigen::VectorXd beta = state.best;
            double lr = schedule.learning_rate;
            for (int t = 0; t < schedule.sgd_steps; ++t) {
                const auto rows = draw_rows(n, m, rng);
                Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
                for (auto r : rows) {
                    const double eta = std::clamp(x.row(r).dot(beta), -30.0, 30.0);
                    grad += (y(r) - 1.0 / (1.0 + std::exp(-eta))) * x.row(r).transpose();
                }
                beta += lr * grad;
                lr *= schedule.decay;
            }
            offer(state, x, y, beta);
        }
    } else if (k > 0) {
        // Revisit: Newton estimates taken at the running average, averaged Robbins-Monro style.
        Eigen::VectorXd centre = state.average_count > 0 ? Eigen::VectorXd(state.average_sum / state.average_count)
                                                         : state.best;
        for (int t = 0; t < schedule.irls_steps; ++t) {
            const auto rows = draw_rows(n, m, rng);
            const Eigen::VectorXd step = subsample_newton(x, y, centre, rows);
            state.average_sum += step;
            state.average_count += 1.0;
            centre = state.average_sum / state.average_count;
        }
        state.current = centre;
        offer(state, x, y, centre);
    }
    ++state.visits;

    const bool has_intercept = ctx.intercept() && !cols.empty() && cols.front() == 0;
    const double p_m = state.rank - (has_intercept ? 1 : 0);
    const double nd = static_cast<double>(n);
    FitResult out;
    out.crit = -0.5 * state.best_deviance - 0.5 * std::log(nd) * p_m + log_model_prior(complexities, params, nd);
    if (!std::isfinite(out.crit)) out.crit = kCritFloor;
    out.coefs = state.best;
    return out;
}

}  // namespace bgnlm
