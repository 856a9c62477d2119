#ifndef LQAGG_HARNESS_HPP
#define LQAGG_HARNESS_HPP

// Monte Carlo harness: data generation, risk estimation, the resolvability
// oracle, the two-stage universal aggregation strategy, and rate sweeps.
//
// Every replicate derives its RNG streams from (base seed, replicate index,
// purpose tag), so results are invariant to execution order and worker count.

#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lqagg/budget.hpp"
#include "lqagg/dictionary.hpp"
#include "lqagg/errors.hpp"
#include "lqagg/mixing.hpp"
#include "lqagg/numeric.hpp"
#include "lqagg/rates.hpp"
#include "lqagg/rng.hpp"
#include "lqagg/selection.hpp"

namespace lqagg::harness {

enum class DesignKind { Fixed, RandomUniform, RandomOrthonormal };

inline std::string to_string(DesignKind k) {
    switch (k) {
        case DesignKind::Fixed: return "fixed";
        case DesignKind::RandomUniform: return "uniform";
        case DesignKind::RandomOrthonormal: return "orthonormal";
    }
    return "?";
}

// What to simulate: design distribution, truth, noise level, sup bound for
// clipping, and the base seed all randomness flows from.
struct GeneratorSpec {
    DesignKind kind = DesignKind::RandomUniform;
    Eigen::MatrixXd fixed_design;          // Fixed only
    int M = 0;                             // random kinds
    Eigen::VectorXd theta0;
    Eigen::VectorXd out_of_span;           // optional extra component of f0^n, Fixed only
    double sigma = 1.0;
    double sup_bound = 1.0;
    std::uint64_t seed = 0;

    int columns() const {
        return kind == DesignKind::Fixed ? static_cast<int>(fixed_design.cols()) : M;
    }

    void validate() const {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw validation_error("generator: sigma must be finite and >= 0");
        if (kind == DesignKind::Fixed) {
            if (fixed_design.size() == 0) throw validation_error("generator: fixed design empty");
            if (!fixed_design.allFinite())
                throw validation_error("generator: non-finite design entries");
        } else {
            if (M < 1) throw validation_error("generator: M must be >= 1");
            if (out_of_span.size() > 0)
                throw validation_error("generator: out-of-span component needs a fixed design");
        }
        if (theta0.size() != columns())
            throw validation_error("generator: theta0 length != number of predictors");
    }
};

struct Dataset {
    Eigen::MatrixXd X;  // n x M
    Eigen::VectorXd y;  // n
    Eigen::VectorXd f0; // f0 evaluated at the design points
};

namespace detail {

inline constexpr std::uint64_t kDesignTag = 0xD0;
inline constexpr std::uint64_t kNoiseTag = 0x10;
inline constexpr std::uint64_t kFreshTag = 0xF0;

inline Eigen::MatrixXd draw_design(const GeneratorSpec& spec, int n, Rng& rng) {
    Eigen::MatrixXd X(n, spec.M);
    switch (spec.kind) {
        case DesignKind::RandomUniform:
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                for (Eigen::Index j = 0; j < X.cols(); ++j)
                    X(i, j) = 2.0 * rng.uniform01() - 1.0;
            return X;
        case DesignKind::RandomOrthonormal:
            // i.i.d. Rademacher coordinates: E X_i X_j = delta_ij, |X_j| = 1
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                for (Eigen::Index j = 0; j < X.cols(); ++j)
                    X(i, j) = rng.rademacher();
            return X;
        case DesignKind::Fixed:
            break;
    }
    throw validation_error("draw_design: fixed design is not drawn");
}

} // namespace detail

// Deterministic function of (spec.seed, replicate). A fixed design is reused
// across replicates; random designs are redrawn.
inline Dataset generate(const GeneratorSpec& spec, int n, int replicate) {
    spec.validate();
    if (n < 1) throw validation_error("generate: n must be >= 1");
    Dataset ds;
    if (spec.kind == DesignKind::Fixed) {
        if (spec.fixed_design.rows() != n)
            throw validation_error("generate: fixed design has wrong row count");
        ds.X = spec.fixed_design;
    } else {
        Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(replicate), detail::kDesignTag}));
        ds.X = detail::draw_design(spec, n, rng);
    }
    ds.f0 = ds.X * spec.theta0;
    if (spec.out_of_span.size() > 0) {
        if (spec.out_of_span.size() != n)
            throw validation_error("generate: out-of-span component has wrong length");
        ds.f0 += spec.out_of_span;
    }
    Rng noise(derive_seed(spec.seed, {static_cast<std::uint64_t>(replicate), detail::kNoiseTag}));
    ds.y = ds.f0;
    for (Eigen::Index i = 0; i < ds.y.size(); ++i) ds.y[i] += spec.sigma * noise.normal();
    return ds;
}

// Fresh evaluation points for random-design risk quadrature.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> fresh_sample(const GeneratorSpec& spec,
                                                                int points, int replicate) {
    if (spec.kind == DesignKind::Fixed)
        throw validation_error("fresh_sample: fixed design risk is evaluated at the design points");
    Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(replicate), detail::kFreshTag}));
    Eigen::MatrixXd X = detail::draw_design(spec, points, rng);
    Eigen::VectorXd f0 = X * spec.theta0;
    return {std::move(X), std::move(f0)};
}

// n x M fixed design with exactly orthonormal columns in the empirical norm:
// sum_i x_ij^2 / n = 1 and orthogonal columns. Deterministic in the seed.
inline Eigen::MatrixXd make_orthonormal_design(int n, int M, std::uint64_t seed) {
    if (M > n) throw validation_error("make_orthonormal_design: need M <= n");
    Rng rng(derive_seed(seed, {0xA11, 0}));
    Eigen::MatrixXd G(n, M);
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, M);
    return std::sqrt(static_cast<double>(n)) * Q;
}

// Index of resolvability: min over candidate models of
// ||fbar_J - f0^n||_n^2 + sigma^2 r_J / n + lambda sigma^2 C_J / n, with
// fbar_J the projection of the (noiseless) f0 evaluations. Simulation-only.
inline std::pair<double, selection::SubsetModel> resolvability_oracle(
    const Dictionary& design, const Eigen::VectorXd& f0, const selection::ModelList& list,
    double sigma, double lambda) {
    if (list.models.empty()) throw validation_error("resolvability: empty model list");
    const double n = static_cast<double>(f0.size());
    const double s2 = sigma * sigma;
    double best_value = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < list.models.size(); ++i) {
        selection::FitResult fit = selection::project(design, f0, list.models[i]);
        double value = (f0 - fit.projection).squaredNorm() / n + s2 * fit.rank / n +
                       lambda * s2 * list.models[i].complexity / n;
        if (i == 0 || value < best_value ||
            (value == best_value &&
             selection::detail::tie_before(list.models[i], list.models[best])))
        {
            best_value = value;
            best = i;
        }
    }
    return {best_value, list.models[best]};
}

// What an estimator hands back for one dataset: fitted values at the design
// points, and (for random-design risk) a predictor for fresh points.
struct Prediction {
    Eigen::VectorXd values;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> at_points;
};

using Estimator = std::function<Prediction(const Dataset&)>;

struct RiskReport {
    std::string estimator_id;
    double mean_risk = 0.0;
    double std_err = 0.0;
    int replicates = 0;
    int failures = 0;
    std::optional<double> oracle;          // resolvability comparator
    std::optional<double> rate_prediction; // from the rates module
    std::optional<double> ratio;           // mean_risk / rate_prediction
};

// Monte Carlo risk: fixed design averages the ASE at the design points,
// random design integrates squared error over a fresh sample per replicate.
// Per-replicate estimator failures are tolerated up to 1%.
inline RiskReport estimate_risk(const Estimator& estimator, const std::string& estimator_id,
                                const GeneratorSpec& spec, int n, int replicates,
                                int test_points, int workers = 1) {
    spec.validate();
    if (replicates < 2) throw validation_error("estimate_risk: need replicates >= 2");
    if (spec.kind != DesignKind::Fixed && test_points < 1)
        throw validation_error("estimate_risk: need test_points >= 1");
    if (workers < 1) workers = 1;

    std::vector<double> risks(static_cast<std::size_t>(replicates), 0.0);
    std::vector<std::uint8_t> failed(static_cast<std::size_t>(replicates), 0);

    auto run_one = [&](int rep) {
        Dataset ds = generate(spec, n, rep);
        Prediction pred = estimator(ds);
        if (spec.kind == DesignKind::Fixed) {
            if (pred.values.size() != ds.y.size())
                throw experiment_error("estimate_risk: estimator returned wrong length");
            risks[static_cast<std::size_t>(rep)] =
                (pred.values - ds.f0).squaredNorm() / static_cast<double>(n);
        } else {
            if (!pred.at_points)
                throw validation_error("estimate_risk: estimator lacks a fresh-point predictor");
            auto [Xf, f0f] = fresh_sample(spec, test_points, rep);
            Eigen::VectorXd yhat = pred.at_points(Xf);
            if (yhat.size() != f0f.size())
                throw experiment_error("estimate_risk: predictor returned wrong length");
            risks[static_cast<std::size_t>(rep)] =
                (yhat - f0f).squaredNorm() / static_cast<double>(test_points);
        }
    };

    auto worker = [&](std::atomic<int>& next) {
        while (true) {
            int rep = next.fetch_add(1);
            if (rep >= replicates) return;
            try {
                run_one(rep);
            } catch (const std::exception&) {
                failed[static_cast<std::size_t>(rep)] = 1;
            }
        }
    };

    std::atomic<int> next{0};
    if (workers == 1) {
        worker(next);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back([&] { worker(next); });
        for (auto& t : pool) t.join();
    }

    std::vector<double> ok;
    ok.reserve(risks.size());
    int failures = 0;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        if (failed[i]) ++failures;
        else ok.push_back(risks[i]);
    }
    if (failures > 0 && failures * 100 > replicates)
        throw experiment_error("estimate_risk: more than 1% of replicates failed (" +
                               std::to_string(failures) + "/" + std::to_string(replicates) + ")");
    if (ok.size() < 2) throw experiment_error("estimate_risk: not enough successful replicates");

    RiskReport report;
    report.estimator_id = estimator_id;
    report.replicates = replicates;
    report.failures = failures;
    report.mean_risk = numeric::mean(ok);
    report.std_err = numeric::sample_sd(ok) / std::sqrt(static_cast<double>(ok.size()));
    return report;
}

// Two-stage universal strategy: split, fit per-subset least squares on the
// first part (clipped to the sup bound), mix everything plus the null model
// on the second part with subset priors (1-p0)/((M^n) C(M,m)) and null prior
// p0.
struct StrategyConfig {
    enum class Aggregator { Catoni, ARM };

    double p0 = 0.05;
    int n1 = -1; // default ceil(n/2)
    Aggregator aggregator = Aggregator::Catoni;
    double sup_bound = 1.0;
    double sigma_hint = 1.0; // builds default aggregator configs
    std::optional<mixing::CatoniConfig> catoni;
    std::optional<mixing::ArmConfig> arm;

    void validate() const {
        if (!(p0 > 0.0 && p0 < 1.0)) throw validation_error("strategy: p0 must lie in (0,1)");
        if (!(sup_bound > 0.0)) throw validation_error("strategy: sup bound must be positive");
        if (!(sigma_hint > 0.0)) throw validation_error("strategy: sigma hint must be positive");
    }
};

struct UniversalResult {
    Prediction prediction;
    mixing::WeightVector weights;
    std::vector<std::string> labels;
    Eigen::MatrixXd candidate_coefficients; // N x M, row per candidate (null row last)
    Eigen::VectorXd aggregate_coefficients;
    double null_weight = 0.0;
    int n1 = 0;
};

inline UniversalResult universal_aggregate(const Dataset& data, int M,
                                           const StrategyConfig& strategy) {
    strategy.validate();
    const int n = static_cast<int>(data.y.size());
    if (n < 2) throw validation_error("universal_aggregate: need n >= 2");
    if (data.X.cols() != M)
        throw validation_error("universal_aggregate: design does not have M columns");
    if (M > selection::kEnumerationCap)
        throw capacity_error("universal_aggregate: M exceeds the enumeration cap");
    const int n1 = strategy.n1 > 0 ? strategy.n1 : (n + 1) / 2;
    if (n1 < 1 || n1 >= n) throw validation_error("universal_aggregate: split outside [1, n-1]");
    const double L = strategy.sup_bound;

    // subset candidates, sizes 1..M^n with the step-III priors
    std::vector<selection::SubsetModel> models;
    int max_size = std::min(M, n);
    for (int m = 1; m <= max_size; ++m) {
        double complexity = -std::log1p(-strategy.p0) +
                            std::log(static_cast<double>(max_size)) +
                            numeric::log_binomial(M, m);
        selection::detail::append_subsets_of_size(models, M, m, complexity);
    }

    const Eigen::MatrixXd X1 = data.X.topRows(n1);
    const Eigen::VectorXd y1 = data.y.head(n1);
    const Eigen::Index n2 = n - n1;

    const Eigen::Index N = static_cast<Eigen::Index>(models.size()) + 1; // + null model
    Eigen::MatrixXd coefs(N, M);
    coefs.setZero();
    mixing::CandidateSet candidates;
    candidates.predictions.resize(N, n2);
    candidates.priors.resize(N);
    candidates.labels.reserve(static_cast<std::size_t>(N));

    for (std::size_t k = 0; k < models.size(); ++k) {
        selection::ModelBasis basis = selection::build_basis(X1, models[k]);
        selection::FitResult fit = selection::project_with_basis(basis, y1);
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(M);
        for (std::size_t j = 0; j < models[k].indices.size(); ++j)
            theta[models[k].indices[j] - 1] = fit.coefficients[static_cast<Eigen::Index>(j)];
        // clip: rescale so fitted values over the whole design stay in [-L, L]
        Eigen::VectorXd fitted_all = data.X * theta;
        double peak = fitted_all.cwiseAbs().maxCoeff();
        if (peak > L) {
            theta *= L / peak;
            fitted_all *= L / peak;
        }
        coefs.row(static_cast<Eigen::Index>(k)) = theta.transpose();
        candidates.predictions.row(static_cast<Eigen::Index>(k)) =
            fitted_all.tail(n2).transpose();
        candidates.priors[static_cast<Eigen::Index>(k)] = models[k].prior();
        candidates.labels.push_back(models[k].label());
    }
    candidates.predictions.row(N - 1).setZero(); // null model f == 0
    candidates.priors[N - 1] = strategy.p0;
    candidates.labels.push_back("null");
    candidates.sup_bound = L;

    const Eigen::VectorXd y2 = data.y.tail(n2);
    mixing::WeightVector weights;
    if (strategy.aggregator == StrategyConfig::Aggregator::Catoni) {
        mixing::CatoniConfig config = strategy.catoni.value_or(
            mixing::CatoniConfig::for_gaussian(strategy.sigma_hint, L));
        weights = mixing::catoni_aggregate(candidates, y2, config);
    } else {
        mixing::ArmConfig config =
            strategy.arm.value_or(mixing::ArmConfig::known(strategy.sigma_hint));
        weights = mixing::arm_aggregate(candidates, y2, config);
    }

    UniversalResult result;
    result.weights = weights;
    result.labels = candidates.labels;
    result.n1 = n1;
    result.null_weight = weights.weights[N - 1];
    result.candidate_coefficients = coefs;
    result.aggregate_coefficients = coefs.transpose() * weights.weights;
    Eigen::VectorXd theta_hat = result.aggregate_coefficients;
    result.prediction.values = data.X * theta_hat;
    result.prediction.at_points = [theta_hat](const Eigen::MatrixXd& pts) {
        return Eigen::VectorXd(pts * theta_hat);
    };
    return result;
}

// Rate sweeps along one axis with the corresponding rate prediction and
// measured/predicted ratio per grid point, plus a log-log slope when the
// axis is numeric-scaling (n, M, t, k).
enum class SweepAxis { N, M, T, Q, K };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::N: return "n";
        case SweepAxis::M: return "M";
        case SweepAxis::T: return "t";
        case SweepAxis::Q: return "q";
        case SweepAxis::K: return "k";
    }
    return "?";
}

struct SweepPoint {
    double axis_value = 0.0;
    RiskReport report;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::N;
    std::vector<SweepPoint> points;
    std::optional<double> slope; // d log(mean risk) / d log(axis)
};

// Builds the estimator for the generator and sample size in force at a grid point.
using EstimatorBuilder = std::function<Estimator(const GeneratorSpec&, int n)>;

struct SweepConfig {
    SweepAxis axis = SweepAxis::N;
    std::vector<double> grid;
    GeneratorSpec spec;
    SparsityBudget budget;
    int n = 0;
    int replicates = 0;
    int test_points = 0;
    int workers = 1;
    std::string estimator_id;
    // fixed-design sweeps over n must rebuild the design for each grid point
    std::function<Eigen::MatrixXd(int)> design_for_n;
};

inline SweepResult rate_sweep(const SweepConfig& config, const EstimatorBuilder& builder) {
    if (config.grid.size() < 3) throw validation_error("rate_sweep: grid length must be >= 3");
    SweepResult result;
    result.axis = config.axis;

    for (double g : config.grid) {
        GeneratorSpec spec = config.spec;
        SparsityBudget budget = config.budget;
        int n = config.n;
        switch (config.axis) {
            case SweepAxis::N:
                n = static_cast<int>(g);
                if (spec.kind == DesignKind::Fixed) {
                    if (!config.design_for_n)
                        throw validation_error(
                            "rate_sweep: sweeping n over a fixed design needs design_for_n");
                    spec.fixed_design = config.design_for_n(n);
                }
                break;
            case SweepAxis::M: {
                int m_new = static_cast<int>(g);
                if (spec.kind == DesignKind::Fixed) {
                    if (m_new > spec.fixed_design.cols())
                        throw validation_error("rate_sweep: M grid exceeds design width");
                    spec.fixed_design = config.spec.fixed_design.leftCols(m_new).eval();
                } else {
                    if (m_new > spec.M) throw validation_error("rate_sweep: M grid exceeds base M");
                    spec.M = m_new;
                }
                spec.theta0 = config.spec.theta0.head(m_new).eval();
                break;
            }
            case SweepAxis::T:
                budget.t = g;
                break;
            case SweepAxis::Q:
                budget.q = g;
                break;
            case SweepAxis::K:
                budget.k = static_cast<int>(g);
                break;
        }

        double prediction = 0.0; // no rate is defined for noiseless runs
        if (spec.sigma > 0.0) {
            ProblemDims dims = ProblemDims::make(n, spec.columns(), spec.sigma);
            if (spec.kind == DesignKind::Fixed) {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(spec.fixed_design);
                double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
                int rank = 0;
                while (rank < svd.singularValues().size() &&
                       svd.singularValues()[rank] > selection::kRankTolerance * smax &&
                       svd.singularValues()[rank] > 0.0)
                    ++rank;
                prediction = rates::phi_rate(dims, budget, std::max(rank, 1));
            } else {
                prediction = rates::psi_rate(dims, budget);
            }
        }

        Estimator estimator = builder(spec, n);
        RiskReport report = estimate_risk(estimator, config.estimator_id, spec, n,
                                          config.replicates, config.test_points, config.workers);
        report.rate_prediction = prediction;
        if (prediction > 0.0) report.ratio = report.mean_risk / prediction;
        result.points.push_back({g, std::move(report)});
    }

    if (config.axis != SweepAxis::Q) {
        bool positive = true;
        std::vector<double> lx, ly;
        for (const SweepPoint& p : result.points) {
            if (!(p.axis_value > 0.0) || !(p.report.mean_risk > 0.0)) {
                positive = false;
                break;
            }
            lx.push_back(std::log(p.axis_value));
            ly.push_back(std::log(p.report.mean_risk));
        }
        if (positive) result.slope = numeric::linear_slope(lx, ly);
    }
    return result;
}

} // namespace lqagg::harness

#endif
