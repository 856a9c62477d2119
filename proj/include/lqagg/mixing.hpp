#ifndef LQAGG_MIXING_HPP
#define LQAGG_MIXING_HPP

// Aggregation-for-adaptation engines.
//
//   ARM     sequential Gaussian predictive scores on the second half of the
//           data (or on everything when sigma is known), Cesaro-averaged
//           posterior weights.
//   Catoni  prefix posteriors under the Gaussian kernel of precision
//           lambda_C = min(alpha/2L, (U_a (17 L^2 + 3.4 V_a))^-1),
//           Cesaro-averaged over all n prefixes.
//   MLS     exponential weights pi_J exp(-Rhat_J / 4 sigma^2) over subset
//           least squares fits, Rhat_J the unbiased risk estimate.
//
// All sequential products are carried as running log-sums: the raw scores
// underflow once n reaches the hundreds.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqagg/errors.hpp"
#include "lqagg/numeric.hpp"
#include "lqagg/selection.hpp"

namespace lqagg::mixing {

// A probability vector over candidates. log_weights is the authoritative
// representation; weights is its exponentiated, normalized image.
struct WeightVector {
    Eigen::VectorXd weights;
    Eigen::VectorXd log_weights;

    static WeightVector from_logs(const Eigen::VectorXd& logs) {
        std::vector<double> v(logs.data(), logs.data() + logs.size());
        double lse = numeric::log_sum_exp(v);
        if (!std::isfinite(lse)) throw validation_error("weights: total mass is zero");
        WeightVector out;
        out.log_weights = logs.array() - lse;
        out.weights = out.log_weights.array().exp();
        out.weights /= out.weights.sum();
        return out;
    }

    // For weights produced by averaging (already normalized).
    static WeightVector from_weights(Eigen::VectorXd w) {
        WeightVector out;
        double total = w.sum();
        if (!(total > 0.0)) throw validation_error("weights: total mass must be positive");
        out.weights = w / total;
        out.log_weights = out.weights.array().log();
        return out;
    }

    void validate() const {
        if (weights.size() != log_weights.size())
            throw validation_error("weights: length mismatch");
        if ((weights.array() < 0.0).any())
            throw validation_error("weights: negative entry");
        if (std::abs(weights.sum() - 1.0) > 1e-10)
            throw validation_error("weights: do not sum to 1");
    }
};

// Candidate predictions evaluated at the aggregation observations: row k is
// candidate k at each point. Priors may be a sub-probability.
struct CandidateSet {
    Eigen::MatrixXd predictions; // N x n_eval
    Eigen::VectorXd priors;      // length N, nonnegative, sums to <= 1
    std::vector<std::string> labels;
    std::optional<double> sup_bound;

    Eigen::Index count() const { return predictions.rows(); }

    void validate() const {
        if (predictions.rows() < 1) throw validation_error("candidates: empty set");
        if (!predictions.allFinite()) throw validation_error("candidates: non-finite predictions");
        if (priors.size() != predictions.rows())
            throw validation_error("candidates: prior length mismatch");
        if ((priors.array() < 0.0).any()) throw validation_error("candidates: negative prior");
        if (priors.sum() > 1.0 + 1e-9) throw validation_error("candidates: priors sum above 1");
        if (sup_bound && predictions.cwiseAbs().maxCoeff() > *sup_bound * (1.0 + 1e-9))
            throw validation_error("candidates: prediction exceeds declared sup-norm bound");
    }
};

struct ArmConfig {
    double sigma_lo = 0.0;
    double sigma_hi = 0.0;
    std::optional<double> sigma_known; // skips the variance-estimation split
    // noise density fixed to Gaussian; general known densities are out of scope

    static ArmConfig banded(double lo, double hi) {
        ArmConfig c;
        c.sigma_lo = lo;
        c.sigma_hi = hi;
        c.validate();
        return c;
    }
    static ArmConfig known(double sigma) {
        ArmConfig c;
        c.sigma_lo = c.sigma_hi = sigma;
        c.sigma_known = sigma;
        c.validate();
        return c;
    }
    void validate() const {
        if (!(sigma_lo > 0.0 && sigma_hi >= sigma_lo && std::isfinite(sigma_hi)))
            throw validation_error("arm config: need 0 < sigma_lo <= sigma_hi < inf");
        if (sigma_known && !(*sigma_known > 0.0))
            throw validation_error("arm config: sigma_known must be positive");
    }
};

struct CatoniConfig {
    double alpha = 0.0;
    double u_alpha = 1.0;
    double v_alpha = 0.0;
    double sup_bound = 0.0; // L

    double lambda_c() const {
        return std::min(alpha / (2.0 * sup_bound),
                        1.0 / (u_alpha * (17.0 * sup_bound * sup_bound + 3.4 * v_alpha)));
    }

    void validate() const {
        if (!(alpha > 0.0 && u_alpha >= 1.0 && v_alpha > 0.0 && sup_bound > 0.0))
            throw validation_error("catoni config: need alpha > 0, U >= 1, V > 0, L > 0");
        if (!(lambda_c() > 0.0)) throw validation_error("catoni config: lambda_C must be positive");
    }

    // Exact Gaussian moment constants for noise sd <= sigma_bar:
    //   U_a = E exp(a|e|) = 2 exp(a^2 s^2/2) Phi(a s)
    //   V_a = E(e^2 exp(a|e|)) / U_a = s^2 ((1 + a^2 s^2) + a s phi / Phi)
    // Small alpha maximizes lambda_C for Gaussian tails.
    static CatoniConfig for_gaussian(double sigma_bar, double sup_bound,
                                     std::optional<double> alpha = std::nullopt) {
        if (!(sigma_bar > 0.0)) throw validation_error("catoni config: sigma_bar must be positive");
        CatoniConfig c;
        c.alpha = alpha.value_or(1.0 / (8.0 * sigma_bar));
        c.sup_bound = sup_bound;
        double a = c.alpha * sigma_bar;
        double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
        double Phi = 0.5 * std::erfc(-a / std::numbers::sqrt2);
        c.u_alpha = 2.0 * std::exp(0.5 * a * a) * Phi;
        c.v_alpha = sigma_bar * sigma_bar * ((1.0 + a * a) + a * phi / Phi);
        c.validate();
        return c;
    }
};

namespace detail {

// Cesaro average of per-prefix posteriors: weights_k = mean over recorded
// prefixes of softmax(log prior_k + cumulative log score_k).
class PrefixAverager {
public:
    explicit PrefixAverager(const Eigen::VectorXd& priors)
        : log_prior_(priors.size()), cumulative_(Eigen::VectorXd::Zero(priors.size())),
          total_(Eigen::VectorXd::Zero(priors.size())), prefixes_(0) {
        for (Eigen::Index k = 0; k < priors.size(); ++k)
            log_prior_[k] = priors[k] > 0.0 ? std::log(priors[k])
                                            : -std::numeric_limits<double>::infinity();
    }

    void accumulate(const Eigen::VectorXd& log_scores) {
        cumulative_ += log_scores;
        std::vector<double> logs(cumulative_.size());
        for (Eigen::Index k = 0; k < cumulative_.size(); ++k)
            logs[static_cast<std::size_t>(k)] = log_prior_[k] + cumulative_[k];
        std::vector<double> w = numeric::softmax_from_logs(logs);
        for (Eigen::Index k = 0; k < total_.size(); ++k)
            total_[k] += w[static_cast<std::size_t>(k)];
        ++prefixes_;
    }

    WeightVector finish() const {
        if (prefixes_ == 0) throw validation_error("mixing: no prefixes accumulated");
        return WeightVector::from_weights(total_ / static_cast<double>(prefixes_));
    }

private:
    Eigen::VectorXd log_prior_;
    Eigen::VectorXd cumulative_;
    Eigen::VectorXd total_;
    int prefixes_;
};

inline double log_gaussian(double residual, double sd) {
    double z = residual / sd;
    return -std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
}

} // namespace detail

// ARM. `split` is n1; the default -1 means ceil(n/2). With sigma known the
// split is skipped and scoring runs over every prefix of the full sample.
inline WeightVector arm_aggregate(const CandidateSet& candidates, const Eigen::VectorXd& y,
                                  const ArmConfig& config, int split = -1) {
    candidates.validate();
    config.validate();
    const Eigen::Index n = y.size();
    const Eigen::Index N = candidates.count();
    if (candidates.predictions.cols() != n)
        throw validation_error("arm: predictions/observation length mismatch");
    if (n < 2) throw validation_error("arm: need n >= 2");
    if (!y.allFinite()) throw validation_error("arm: non-finite response");

    Eigen::VectorXd sd(N);
    Eigen::Index start;
    if (config.sigma_known) {
        sd.setConstant(*config.sigma_known);
        start = 0;
    } else {
        Eigen::Index n1 = split < 0 ? (n + 1) / 2 : split;
        if (n1 < 1 || n1 >= n) throw validation_error("arm: split must lie in [1, n-1]");
        for (Eigen::Index k = 0; k < N; ++k) {
            double ss = 0.0;
            for (Eigen::Index i = 0; i < n1; ++i) {
                double r = y[i] - candidates.predictions(k, i);
                ss += r * r;
            }
            double var = ss / static_cast<double>(n1);
            var = std::clamp(var, config.sigma_lo * config.sigma_lo,
                             config.sigma_hi * config.sigma_hi);
            sd[k] = std::sqrt(var);
        }
        start = n1;
    }

    detail::PrefixAverager averager(candidates.priors);
    Eigen::VectorXd log_scores(N);
    for (Eigen::Index l = start; l < n; ++l) {
        for (Eigen::Index k = 0; k < N; ++k)
            log_scores[k] = detail::log_gaussian(y[l] - candidates.predictions(k, l), sd[k]);
        averager.accumulate(log_scores);
    }
    return averager.finish();
}

inline WeightVector catoni_aggregate(const CandidateSet& candidates, const Eigen::VectorXd& y,
                                     const CatoniConfig& config) {
    candidates.validate();
    config.validate();
    const Eigen::Index n = y.size();
    const Eigen::Index N = candidates.count();
    if (candidates.predictions.cols() != n)
        throw validation_error("catoni: predictions/observation length mismatch");
    if (n < 1) throw validation_error("catoni: need n >= 1");
    if (!y.allFinite()) throw validation_error("catoni: non-finite response");

    const double lambda = config.lambda_c();
    const double log_norm = 0.5 * std::log(lambda / (2.0 * std::numbers::pi));
    detail::PrefixAverager averager(candidates.priors);
    Eigen::VectorXd log_scores(N);
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < N; ++k) {
            double r = y[l] - candidates.predictions(k, l);
            log_scores[k] = log_norm - 0.5 * lambda * r * r;
        }
        averager.accumulate(log_scores);
    }
    return averager.finish();
}

struct MlsResult {
    WeightVector weights;
    Eigen::VectorXd combined; // fhat_MLS = sum_J w_J Yhat_J
};

// Mixed least squares over already-projected models. sigma must be known;
// with sigma unknown this estimator is undefined and selection must go
// through the ABC' path instead.
inline MlsResult mls_aggregate(const std::vector<selection::SubsetModel>& models,
                               const Eigen::VectorXd& y,
                               const std::vector<selection::FitResult>& fits, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw validation_error("mls: known positive sigma required");
    if (models.empty() || models.size() != fits.size())
        throw validation_error("mls: models/fits mismatch");
    const double n = static_cast<double>(y.size());
    const double s2 = sigma * sigma;

    Eigen::VectorXd logs(static_cast<Eigen::Index>(models.size()));
    for (std::size_t j = 0; j < models.size(); ++j) {
        if (fits[j].projection.size() != y.size())
            throw validation_error("mls: projection length mismatch");
        double risk_estimate = fits[j].rss + 2.0 * fits[j].rank * s2 - n * s2;
        logs[static_cast<Eigen::Index>(j)] =
            -models[j].complexity - risk_estimate / (4.0 * s2);
    }
    MlsResult out;
    out.weights = WeightVector::from_logs(logs);
    out.combined = Eigen::VectorXd::Zero(y.size());
    for (std::size_t j = 0; j < models.size(); ++j)
        out.combined += out.weights.weights[static_cast<Eigen::Index>(j)] * fits[j].projection;
    return out;
}

// Monte Carlo fast path over precomputed bases.
inline MlsResult mls_with_bases(const selection::ModelList& list,
                                const std::vector<selection::ModelBasis>& bases,
                                const Eigen::VectorXd& y, double sigma) {
    if (list.models.size() != bases.size())
        throw validation_error("mls_with_bases: list/bases mismatch");
    std::vector<selection::FitResult> fits;
    fits.reserve(bases.size());
    for (const auto& basis : bases) fits.push_back(selection::project_with_basis(basis, y));
    return mls_aggregate(list.models, y, fits, sigma);
}

} // namespace lqagg::mixing

#endif
