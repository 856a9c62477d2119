#ifndef LQAGG_MAUREY_HPP
#define LQAGG_MAUREY_HPP

// Constructive sparse approximation inside an lq hull (0 < q <= 1): keep the
// few coefficients above t m^{-1/q} exactly, replace the remaining light mass
// by an m-draw empirical average of a random single-column function, and
// retry draws until one meets the excess-error bound
//
//     2^{2/q-1} t^2 m^{1-2/q}
//
// with l1 norm still <= t. The output has at most 2m-1 nonzeros. Hard
// sparsity (q = 0) is excluded: there approximation is plain truncation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lqagg/dictionary.hpp"
#include "lqagg/errors.hpp"
#include "lqagg/rates.hpp"
#include "lqagg/rng.hpp"

namespace lqagg::maurey {

struct ThresholdSplit {
    std::vector<Eigen::Index> heavy; // indices with |c_j| > t m^{-1/q}; fewer than m of them
    Eigen::VectorXd light;           // c with the heavy entries zeroed
    double threshold = 0.0;
    double light_l1 = 0.0;
    double light_l1_bound = 0.0;     // D = t m^{1-1/q}
};

inline ThresholdSplit threshold_split(const Eigen::VectorXd& c, double t, int m, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw validation_error("threshold_split: need 0 < q <= 1");
    if (m < 1) throw validation_error("threshold_split: need m >= 1");
    if (!(t > 0.0)) throw validation_error("threshold_split: need t > 0");
    std::vector<double> cv(c.data(), c.data() + c.size());
    double norm = rates::lq_norm(cv, q);
    if (norm > t * (1.0 + 1e-9) + 1e-12)
        throw validation_error("threshold_split: lq budget violated: ||c||_q > t");

    ThresholdSplit s;
    s.threshold = t * std::pow(static_cast<double>(m), -1.0 / q);
    s.light_l1_bound = t * std::pow(static_cast<double>(m), 1.0 - 1.0 / q);
    s.light = c;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
        if (std::abs(c[j]) > s.threshold) {
            s.heavy.push_back(j);
            s.light[j] = 0.0;
        }
    }
    s.light_l1 = s.light.cwiseAbs().sum();
    if (s.heavy.size() >= static_cast<std::size_t>(m))
        throw validation_error("threshold_split: heavy set reached m, budget violated");
    return s;
}

struct SparseApproxResult {
    Eigen::VectorXd theta;       // at most 2m-1 nonzeros
    double l1_norm = 0.0;        // <= t
    double achieved_excess = 0.0;
    double bound = 0.0;          // 2^{2/q-1} t^2 m^{1-2/q}
    int draws_used = 0;
    int support = 0;
};

inline double excess_bound(double q, double t, int m) {
    return std::pow(2.0, 2.0 / q - 1.0) * t * t * std::pow(static_cast<double>(m), 1.0 - 2.0 / q);
}

// One realization of the randomized rounding: heavy part kept exactly, light
// part replaced by (D/m) sign(c_j) k_j where k_j counts how many of the m
// i.i.d. draws landed on column j. Inverse-CDF sampling over the light
// probability vector (renormalized to sum exactly 1).
inline Eigen::VectorXd maurey_sample(const ThresholdSplit& split, const Eigen::VectorXd& c,
                                     int m, Rng& rng) {
    const double D = split.light_l1_bound;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(c.size());
    for (Eigen::Index j : split.heavy) theta[j] = c[j];

    if (split.light_l1 <= 0.0 || D <= 0.0) {
        for (int i = 0; i < m; ++i) rng.next_u64(); // keep the stream position uniform
        return theta;
    }

    // cumulative probabilities over light support; trailing mass is P(U = 0)
    std::vector<Eigen::Index> support;
    std::vector<double> cum;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < split.light.size(); ++j) {
        if (split.light[j] != 0.0) {
            acc += std::abs(split.light[j]) / D;
            support.push_back(j);
            cum.push_back(acc);
        }
    }
    double total = std::min(acc, 1.0);
    if (acc > 1.0 + 1e-9) throw validation_error("maurey_sample: light mass exceeds D");
    if (acc > 1.0) // renormalize accumulated rounding so the CDF tops out at 1
        for (double& v : cum) v /= acc;

    const double step = D / static_cast<double>(m);
    for (int i = 0; i < m; ++i) {
        double u = rng.uniform01();
        if (u >= total) continue; // U = 0
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        std::size_t idx = static_cast<std::size_t>(it - cum.begin());
        if (idx >= support.size()) idx = support.size() - 1;
        Eigen::Index j = support[idx];
        theta[j] += step * (c[j] > 0 ? 1.0 : -1.0);
    }
    return theta;
}

// Rejection loop exhausted without meeting the excess bound; carries the best
// draw seen for diagnostics.
struct retry_exhausted : std::runtime_error {
    SparseApproxResult best;
    retry_exhausted(std::string what, SparseApproxResult b)
        : std::runtime_error(std::move(what)), best(std::move(b)) {}
};

// Search over at most max_draws independent realizations for one whose
// squared error to `target` is within excess_bound(q, t, m) of the error of
// f_c itself, with l1 norm <= t. The bound holds in expectation, so a
// satisfying draw turns up quickly.
//
// achieved_excess is reported relative to d2_reference when the caller can
// supply the hull projection error d^2(f0; F_q(t)); otherwise it is the raw
// squared error to target.
inline SparseApproxResult maurey_round(const Dictionary& dict, const Eigen::VectorXd& c,
                                       double t, int m, double q,
                                       const Eigen::VectorXd& target, std::uint64_t seed,
                                       int max_draws = 1000,
                                       std::optional<double> d2_reference = std::nullopt) {
    if (max_draws < 1) throw validation_error("maurey_round: need max_draws >= 1");
    if (target.size() != dict.n_eval())
        throw validation_error("maurey_round: target length != dictionary rows");
    if (dict.col_norms.maxCoeff() > 1.0 + 1e-9)
        throw validation_error("maurey_round: dictionary columns must have norm <= 1");

    ThresholdSplit split = threshold_split(c, t, m, q);
    const double bound = excess_bound(q, t, m);
    const double err_ref = dict.sq_norm_n(dict.evaluate(c) - target);
    const double baseline = d2_reference.value_or(0.0);

    Rng rng(seed);
    SparseApproxResult best;
    best.bound = bound;
    double best_err = std::numeric_limits<double>::infinity();

    for (int draw = 1; draw <= max_draws; ++draw) {
        Eigen::VectorXd theta = maurey_sample(split, c, m, rng);
        double err = dict.sq_norm_n(dict.evaluate(theta) - target);
        double l1 = theta.cwiseAbs().sum();
        if (err < best_err) {
            best_err = err;
            best.theta = theta;
            best.l1_norm = l1;
            best.achieved_excess = err - baseline;
            best.support = static_cast<int>((theta.array() != 0.0).count());
            best.draws_used = draw;
        }
        if (err <= err_ref + bound + 1e-12 && l1 <= t + 1e-9) {
            SparseApproxResult out;
            out.theta = std::move(theta);
            out.l1_norm = l1;
            out.achieved_excess = err - baseline;
            out.bound = bound;
            out.draws_used = draw;
            out.support = static_cast<int>((out.theta.array() != 0.0).count());
            return out;
        }
    }
    throw retry_exhausted("maurey_round: no satisfying draw within max_draws", std::move(best));
}

} // namespace lqagg::maurey

#endif
