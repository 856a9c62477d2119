#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "lqagg/mixing.hpp"
#include "lqagg/rng.hpp"

using namespace lqagg;
using namespace lqagg::mixing;
using Catch::Matchers::WithinAbs;

namespace {

double gauss_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Direct product-space ARM weights, no logarithms. Usable while the raw
// score products stay inside double range.
Eigen::VectorXd direct_arm(const CandidateSet& cs, const Eigen::VectorXd& y,
                           const ArmConfig& config, int split = -1) {
    const Eigen::Index n = y.size();
    const Eigen::Index N = cs.count();
    Eigen::VectorXd sd(N);
    Eigen::Index start = 0;
    if (config.sigma_known) {
        sd.setConstant(*config.sigma_known);
    } else {
        Eigen::Index n1 = split < 0 ? (n + 1) / 2 : split;
        for (Eigen::Index k = 0; k < N; ++k) {
            double ss = 0.0;
            for (Eigen::Index i = 0; i < n1; ++i) {
                double r = y[i] - cs.predictions(k, i);
                ss += r * r;
            }
            double var = std::clamp(ss / static_cast<double>(n1),
                                    config.sigma_lo * config.sigma_lo,
                                    config.sigma_hi * config.sigma_hi);
            sd[k] = std::sqrt(var);
        }
        start = n1;
    }
    Eigen::VectorXd score = Eigen::VectorXd::Ones(N);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(N);
    for (Eigen::Index l = start; l < n; ++l) {
        for (Eigen::Index k = 0; k < N; ++k)
            score[k] *= gauss_pdf((y[l] - cs.predictions(k, l)) / sd[k]) / sd[k];
        Eigen::VectorXd posterior = cs.priors.array() * score.array();
        total += posterior / posterior.sum();
    }
    return total / static_cast<double>(n - start);
}

Eigen::VectorXd direct_catoni(const CandidateSet& cs, const Eigen::VectorXd& y,
                              const CatoniConfig& config) {
    const Eigen::Index n = y.size();
    const Eigen::Index N = cs.count();
    const double lambda = config.lambda_c();
    Eigen::VectorXd score = Eigen::VectorXd::Ones(N);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(N);
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < N; ++k) {
            double r = y[l] - cs.predictions(k, l);
            score[k] *= std::sqrt(lambda / (2.0 * std::numbers::pi)) *
                        std::exp(-0.5 * lambda * r * r);
        }
        Eigen::VectorXd posterior = cs.priors.array() * score.array();
        total += posterior / posterior.sum();
    }
    return total / static_cast<double>(n);
}

CandidateSet make_candidates(const Eigen::MatrixXd& preds, const Eigen::VectorXd& priors) {
    CandidateSet cs;
    cs.predictions = preds;
    cs.priors = priors;
    for (Eigen::Index k = 0; k < preds.rows(); ++k)
        cs.labels.push_back("c" + std::to_string(k));
    return cs;
}

} // namespace

TEST_CASE("single candidate gets all the weight") {
    Eigen::MatrixXd preds(1, 6);
    preds << 0.1, -0.2, 0.3, 0.0, 0.5, -0.1;
    Eigen::VectorXd y(6);
    y << 0.0, 0.1, 0.2, -0.1, 0.4, 0.0;
    CandidateSet cs = make_candidates(preds, Eigen::VectorXd::Ones(1));

    WeightVector w1 = arm_aggregate(cs, y, ArmConfig::known(1.0));
    CHECK_THAT(w1.weights[0], WithinAbs(1.0, 1e-12));
    w1.validate();

    WeightVector w2 = catoni_aggregate(cs, y, CatoniConfig::for_gaussian(1.0, 1.0));
    CHECK_THAT(w2.weights[0], WithinAbs(1.0, 1e-12));
}

TEST_CASE("identical candidates with equal priors split the weight evenly") {
    Eigen::MatrixXd preds(2, 8);
    Rng rng(17);
    for (int i = 0; i < 8; ++i) preds(0, i) = preds(1, i) = rng.normal();
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) y[i] = rng.normal();
    CandidateSet cs = make_candidates(preds, Eigen::VectorXd::Constant(2, 0.5));

    WeightVector warm = arm_aggregate(cs, y, ArmConfig::banded(0.5, 2.0));
    CHECK_THAT(warm.weights[0], WithinAbs(0.5, 1e-12));
    CHECK_THAT(warm.weights[1], WithinAbs(0.5, 1e-12));

    WeightVector wcat = catoni_aggregate(cs, y, CatoniConfig::for_gaussian(1.0, 2.0));
    CHECK_THAT(wcat.weights[0], WithinAbs(0.5, 1e-12));
}

TEST_CASE("ARM crushes a candidate that is off by a constant 10") {
    const int n = 200;
    Rng rng(2311);
    Eigen::VectorXd f0(n), y(n);
    for (int i = 0; i < n; ++i) {
        f0[i] = std::sin(0.1 * i);
        y[i] = f0[i] + rng.normal();
    }
    Eigen::MatrixXd preds(2, n);
    preds.row(0) = f0.transpose();
    preds.row(1) = (f0.array() + 10.0).matrix().transpose();
    CandidateSet cs = make_candidates(preds, Eigen::VectorXd::Constant(2, 0.5));

    ArmConfig cfg = ArmConfig::known(1.0);
    WeightVector w = arm_aggregate(cs, y, cfg);
    CHECK(w.weights[0] > 0.99);

    // brute-force probability computation on the same dataset
    Eigen::VectorXd direct = direct_arm(cs, y, cfg);
    CHECK_THAT(w.weights[0], WithinAbs(direct[0], 1e-8));
    CHECK_THAT(w.weights[1], WithinAbs(direct[1], 1e-8));
}

TEST_CASE("Catoni favors the uniformly better candidate; permutation equivariance") {
    const int n = 5;
    Eigen::VectorXd y(n);
    y << 0.2, -0.1, 0.3, 0.1, 0.0;
    Eigen::MatrixXd preds(2, n);
    preds.row(0) << 0.1, 0.0, 0.2, 0.1, 0.1;  // closer at every prefix
    preds.row(1) << 1.1, -1.0, 1.4, 0.9, -1.2;
    CandidateSet cs = make_candidates(preds, Eigen::VectorXd::Constant(2, 0.5));
    CatoniConfig cfg = CatoniConfig::for_gaussian(1.0, 2.0);

    WeightVector w = catoni_aggregate(cs, y, cfg);
    CHECK(w.weights[0] > 0.5);

    // direct small-n enumeration of the defining formula
    Eigen::VectorXd direct = direct_catoni(cs, y, cfg);
    CHECK_THAT(w.weights[0], WithinAbs(direct[0], 1e-12));

    // permuting the candidates permutes the weights
    Eigen::MatrixXd swapped(2, n);
    swapped.row(0) = preds.row(1);
    swapped.row(1) = preds.row(0);
    WeightVector wswap = catoni_aggregate(make_candidates(swapped, cs.priors), y, cfg);
    CHECK_THAT(wswap.weights[1], WithinAbs(w.weights[0], 1e-14));
    CHECK_THAT(wswap.weights[0], WithinAbs(w.weights[1], 1e-14));
}

TEST_CASE("log-domain weights match direct product evaluation (n <= 12, N <= 4)") {
    Rng rng(909);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_int(0, 9));
        int N = 1 + static_cast<int>(rng.uniform_int(0, 3));
        Eigen::MatrixXd preds(N, n);
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < n; ++i) preds(k, i) = 2.0 * rng.uniform01() - 1.0;
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = 2.0 * rng.normal();
        Eigen::VectorXd priors(N);
        for (int k = 0; k < N; ++k) priors[k] = 0.1 + rng.uniform01();
        priors /= priors.sum() * (1.0 + 0.2 * rng.uniform01()); // sub-probability too
        CandidateSet cs = make_candidates(preds, priors);

        ArmConfig banded = ArmConfig::banded(0.5, 2.0);
        Eigen::VectorXd direct = direct_arm(cs, y, banded);
        WeightVector w = arm_aggregate(cs, y, banded);
        for (int k = 0; k < N; ++k) CHECK_THAT(w.weights[k], WithinAbs(direct[k], 1e-8));

        ArmConfig known = ArmConfig::known(1.3);
        Eigen::VectorXd direct_k = direct_arm(cs, y, known);
        WeightVector wk = arm_aggregate(cs, y, known);
        for (int k = 0; k < N; ++k) CHECK_THAT(wk.weights[k], WithinAbs(direct_k[k], 1e-8));

        CatoniConfig catoni = CatoniConfig::for_gaussian(1.0, 3.0);
        Eigen::VectorXd direct_c = direct_catoni(cs, y, catoni);
        WeightVector wc = catoni_aggregate(cs, y, catoni);
        for (int k = 0; k < N; ++k) CHECK_THAT(wc.weights[k], WithinAbs(direct_c[k], 1e-8));
    }
}

TEST_CASE("normalization holds on fuzzed inputs") {
    Rng rng(5150);
    for (int trial = 0; trial < 2000; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(0, 18));
        int N = 1 + static_cast<int>(rng.uniform_int(0, 5));
        Eigen::MatrixXd preds(N, n);
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < n; ++i) preds(k, i) = 4.0 * rng.uniform01() - 2.0;
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = rng.normal(0.0, 1.5);
        Eigen::VectorXd priors(N);
        for (int k = 0; k < N; ++k) priors[k] = rng.uniform01() + 1e-3;
        priors /= priors.sum();
        CandidateSet cs = make_candidates(preds, priors);

        WeightVector w = (trial % 2 == 0)
                             ? arm_aggregate(cs, y, ArmConfig::banded(0.7, 1.8))
                             : catoni_aggregate(cs, y, CatoniConfig::for_gaussian(1.5, 2.0));
        CHECK(std::abs(w.weights.sum() - 1.0) <= 1e-10);
        CHECK((w.weights.array() >= 0.0).all());
        w.validate();
        // log_weights is consistent with weights
        std::vector<double> lw(w.log_weights.data(), w.log_weights.data() + w.log_weights.size());
        double lse = numeric::log_sum_exp(lw);
        for (Eigen::Index k = 0; k < w.weights.size(); ++k)
            CHECK_THAT(std::exp(w.log_weights[k] - lse), WithinAbs(w.weights[k], 1e-12));
    }
}

TEST_CASE("prior continuity: a vanishing prior extinguishes its weight monotonically") {
    Eigen::MatrixXd preds(3, 6);
    Rng rng(33);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 6; ++i) preds(k, i) = rng.normal();
    Eigen::VectorXd y(6);
    for (int i = 0; i < 6; ++i) y[i] = rng.normal();

    double last_arm = 1.0, last_cat = 1.0;
    for (double eps : {0.2, 0.1, 0.05, 0.01, 1e-3, 1e-6, 1e-9}) {
        Eigen::VectorXd priors(3);
        priors << 0.4, 0.4, eps;
        CandidateSet cs = make_candidates(preds, priors);
        double wa = arm_aggregate(cs, y, ArmConfig::known(1.0)).weights[2];
        double wc = catoni_aggregate(cs, y, CatoniConfig::for_gaussian(1.0, 4.0)).weights[2];
        CHECK(wa < last_arm);
        CHECK(wc < last_cat);
        last_arm = wa;
        last_cat = wc;
    }
    CHECK(last_arm < 1e-6);
    CHECK(last_cat < 1e-6);
}

TEST_CASE("MLS weights match the closed-form exponential weighting") {
    // n = 8, M = 2 orthonormal fixed design
    const int n = 8, M = 2;
    Eigen::MatrixXd X(n, M);
    X.setZero();
    for (int i = 0; i < n; ++i) X(i, i % 2) = 2.0; // orthogonal, column norm 1 in ||.||_n... scaled below
    X *= std::sqrt(static_cast<double>(n) / (2.0 * 4.0)); // sum x^2 = n per column
    Dictionary design = Dictionary::empirical(X);
    Rng rng(812);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = 0.7 * X(i, 0) + rng.normal();

    selection::ModelList list =
        selection::enumerate_models(M, n, selection::ListPurpose::MLS, 2);
    std::vector<selection::FitResult> fits;
    for (const auto& m : list.models) fits.push_back(selection::project(design, y, m));
    double sigma = 1.0;
    MlsResult res = mls_aggregate(list.models, y, fits, sigma);

    // independent two-line computation
    Eigen::VectorXd direct(static_cast<Eigen::Index>(list.models.size()));
    for (std::size_t j = 0; j < list.models.size(); ++j) {
        double rhat = fits[j].rss + 2.0 * fits[j].rank - n;
        direct[static_cast<Eigen::Index>(j)] =
            list.models[j].prior() * std::exp(-rhat / 4.0);
    }
    direct /= direct.sum();
    for (Eigen::Index j = 0; j < direct.size(); ++j)
        CHECK_THAT(res.weights.weights[j], WithinAbs(direct[j], 1e-12));

    // combined prediction is the weight-blend of the projections
    Eigen::VectorXd blend = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < fits.size(); ++j)
        blend += direct[static_cast<Eigen::Index>(j)] * fits[j].projection;
    CHECK_THAT((res.combined - blend).norm(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("MLS degenerate lists") {
    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 0.5, -0.3;

    selection::SubsetModel m1;
    m1.indices = {1};
    m1.complexity = 1.0;
    selection::FitResult f1;
    f1.projection = 0.5 * y;
    f1.rss = (y - f1.projection).squaredNorm();
    f1.rank = 1;

    // single model: combined equals its projection
    MlsResult single = mls_aggregate({m1}, y, {f1}, 1.0);
    CHECK_THAT(single.weights.weights[0], WithinAbs(1.0, 1e-15));
    CHECK(single.combined == f1.projection);

    // duplicated model with equal priors: equal weights, same prediction
    MlsResult dup = mls_aggregate({m1, m1}, y, {f1, f1}, 1.0);
    CHECK_THAT(dup.weights.weights[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT((dup.combined - f1.projection).norm(), WithinAbs(0.0, 1e-12));

    CHECK_THROWS_AS(mls_aggregate({m1}, y, {f1}, 0.0), validation_error);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(ArmConfig::banded(0.0, 1.0), validation_error);
    CHECK_THROWS_AS(ArmConfig::banded(2.0, 1.0), validation_error);
    CatoniConfig bad;
    bad.alpha = 1.0;
    bad.u_alpha = 0.5; // < 1
    bad.v_alpha = 1.0;
    bad.sup_bound = 1.0;
    CHECK_THROWS_AS(bad.validate(), validation_error);

    // split bounds
    Eigen::MatrixXd preds(1, 4);
    preds.setZero();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    CandidateSet cs = make_candidates(preds, Eigen::VectorXd::Ones(1));
    CHECK_THROWS_AS(arm_aggregate(cs, y, ArmConfig::banded(0.5, 2.0), 4), validation_error);
    CHECK_THROWS_AS(arm_aggregate(cs, y, ArmConfig::banded(0.5, 2.0), 0), validation_error);
}
