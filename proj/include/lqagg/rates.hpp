#ifndef LQAGG_RATES_HPP
#define LQAGG_RATES_HPP

// Sparsity-index and minimax rate calculus. Everything here is a pure,
// deterministic function of (n, M, sigma) and a sparsity budget:
//
//   m_ideal  best size trading approximation error t^2 m^{1-2/q}
//            against estimation price sigma^2 m / n,
//   SER(m)   1 + log(M/m), the price ratio of searching over all
//            size-m subsets vs fitting one,
//   m_eff    m_ideal deflated by SER(m_ideal)^{q/2}; drives the rate,
//   REG      sigma^2 (1 ^ m_eff (1 + log(M/m_eff)) / n), the regret rate,
//   psi/phi  piecewise risk-rate shapes for random / fixed design.
//
// Natural logarithms throughout.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "lqagg/budget.hpp"
#include "lqagg/errors.hpp"
#include "lqagg/numeric.hpp"

namespace lqagg::rates {

// Which case of the piecewise rate definition fired.
enum class RateBranch {
    Saturated,      // m_eff = n: no convergence, rate sigma^2
    FullDictionary, // m_eff = M < n: linear-aggregation price sigma^2 M / n
    Interior,       // 1 < m_eff < M ^ n: soft-sparsity rate
    SingleTerm,     // m_eff = 1: at most one term is worth fitting
    HardSparsity,   // q = 0 formula
    JointSoft,      // joint constraint, lq side attains the min
    JointHard       // joint constraint, l0 side attains the min
};

inline std::string to_string(RateBranch b) {
    switch (b) {
        case RateBranch::Saturated: return "saturated";
        case RateBranch::FullDictionary: return "full_dictionary";
        case RateBranch::Interior: return "interior";
        case RateBranch::SingleTerm: return "single_term";
        case RateBranch::HardSparsity: return "hard_sparsity";
        case RateBranch::JointSoft: return "joint_soft";
        case RateBranch::JointHard: return "joint_hard";
    }
    return "?";
}

// lq (quasi)norm: q = 0 counts nonzeros, q > 0 gives (sum |theta_j|^q)^{1/q}.
inline double lq_norm(std::span<const double> theta, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw validation_error("lq_norm: q must lie in [0, 1]");
    for (double v : theta)
        if (!std::isfinite(v)) throw validation_error("lq_norm: non-finite coefficient");
    if (q == 0.0) {
        int count = 0;
        for (double v : theta) count += (v != 0.0);
        return static_cast<double>(count);
    }
    double s = 0.0;
    for (double v : theta) s += std::pow(std::abs(v), q);
    return std::pow(s, 1.0 / q);
}

// SER(m) = 1 + log(M/m) for 1 <= m <= M.
inline double search_ratio(int m, int M) {
    if (m < 1 || m > M) throw validation_error("search_ratio: need 1 <= m <= M");
    return 1.0 + std::log(static_cast<double>(M) / static_cast<double>(m));
}

namespace detail {

// ceil((n t^2 tau)^{q/2}) ^ M ^ n for the soft constraint.
inline int ideal_lq(const ProblemDims& d, double q, double t) {
    double base = std::pow(static_cast<double>(d.n) * t * t * d.tau, q / 2.0);
    int raw = numeric::snapped_ceil(base);
    raw = std::max(raw, 1);
    return std::min({raw, d.M, d.n});
}

inline int effective_lq(const ProblemDims& d, double q, double t) {
    int ideal = ideal_lq(d, q, t);
    if (ideal == std::min(d.M, d.n)) return ideal;
    double deflated = ideal / std::pow(search_ratio(ideal, d.M), q / 2.0);
    return std::max(1, numeric::snapped_ceil(deflated));
}

} // namespace detail

// Ideal model size m*. For the joint case this is the lq value; the k-cap is
// applied by effective_model_size.
inline int ideal_model_size(const ProblemDims& dims, const SparsityBudget& budget) {
    dims.validate();
    budget.validate(dims.M);
    switch (budget.constraint_case) {
        case ConstraintCase::L0Only:
            return std::min(*budget.k, dims.n);
        case ConstraintCase::LqOnly:
        case ConstraintCase::Joint:
            return detail::ideal_lq(dims, budget.q, *budget.t);
    }
    throw validation_error("ideal_model_size: bad case");
}

// Effective model size for the budget's case.
inline int effective_model_size(const ProblemDims& dims, const SparsityBudget& budget) {
    dims.validate();
    budget.validate(dims.M);
    switch (budget.constraint_case) {
        case ConstraintCase::LqOnly:
            return detail::effective_lq(dims, budget.q, *budget.t);
        case ConstraintCase::L0Only:
            return std::min(*budget.k, dims.n);
        case ConstraintCase::Joint:
            return std::min(detail::effective_lq(dims, budget.q, *budget.t), *budget.k);
    }
    throw validation_error("effective_model_size: bad case");
}

// REG(m) = sigma^2 (1 ^ m (1 + log(M/m)) / n) for an explicit model size.
inline double reg_value(int m, int M, int n, double sigma) {
    double searching = m * search_ratio(m, M) / n;
    return sigma * sigma * std::min(1.0, searching);
}

// REG at the budget's effective model size.
inline double reg_rate(const ProblemDims& dims, const SparsityBudget& budget) {
    return reg_value(effective_model_size(dims, budget), dims.M, dims.n, dims.sigma);
}

namespace detail {

struct BranchedRate {
    double value;
    RateBranch branch;
};

// The soft-constraint rate shape shared by psi and phi; `cap` is sigma^2 for
// random design and sigma^2 r_M / n for fixed design.
inline BranchedRate lq_shape(const ProblemDims& d, double q, double t, double cap) {
    int m_eff = effective_lq(d, q, t);
    double s2 = d.sigma * d.sigma;
    if (m_eff == d.n) return {cap, RateBranch::Saturated};
    if (m_eff == d.M && d.M < d.n)
        return {std::min(s2 * d.M / d.n, cap), RateBranch::FullDictionary};
    if (m_eff > 1) {
        double base = std::pow(static_cast<double>(d.n) * t * t * d.tau, q / 2.0);
        double inner = (1.0 + std::log(d.M / base)) / d.n;
        double v = std::pow(d.sigma, 2.0 - q) * std::pow(t, q) * std::pow(inner, 1.0 - q / 2.0);
        return {std::min(v, cap), RateBranch::Interior};
    }
    double v = std::max(t * t, s2 / d.n);
    return {std::min(v, cap), RateBranch::SingleTerm};
}

inline BranchedRate l0_shape(const ProblemDims& d, int k, double cap) {
    double s2 = d.sigma * d.sigma;
    double v = s2 * k * search_ratio(k, d.M) / d.n;
    return {std::min(v, cap), RateBranch::HardSparsity};
}

template <typename LqFn, typename L0Fn>
inline BranchedRate dispatch(const SparsityBudget& budget, LqFn lq_fn, L0Fn l0_fn) {
    switch (budget.constraint_case) {
        case ConstraintCase::LqOnly:
            return lq_fn(budget.q, *budget.t);
        case ConstraintCase::L0Only:
            return l0_fn(*budget.k);
        case ConstraintCase::Joint: {
            BranchedRate a = lq_fn(budget.q, *budget.t);
            BranchedRate b = l0_fn(*budget.k);
            if (a.value <= b.value) return {a.value, RateBranch::JointSoft};
            return {b.value, RateBranch::JointHard};
        }
    }
    throw validation_error("rates: bad case");
}

} // namespace detail

// Random-design minimax rate shape Psi.
inline double psi_rate(const ProblemDims& dims, const SparsityBudget& budget) {
    dims.validate();
    budget.validate(dims.M);
    double s2 = dims.sigma * dims.sigma;
    return detail::dispatch(
               budget, [&](double q, double t) { return detail::lq_shape(dims, q, t, s2); },
               [&](int k) { return detail::l0_shape(dims, k, s2); })
        .value;
}

// Fixed-design rate shape Phi; capped by sigma^2 r_M / n with r_M the rank of
// the full design.
inline double phi_rate(const ProblemDims& dims, const SparsityBudget& budget, int full_rank) {
    dims.validate();
    budget.validate(dims.M);
    if (full_rank < 1 || full_rank > std::min(dims.n, dims.M))
        throw validation_error("phi_rate: full_rank must lie in [1, min(n, M)]");
    double cap = dims.sigma * dims.sigma * full_rank / dims.n;
    return detail::dispatch(
               budget,
               [&](double q, double t) {
                   detail::BranchedRate r = detail::lq_shape(dims, q, t, cap);
                   // first Phi branch merges m_eff = M ^ n into the rank cap
                   if (r.branch == RateBranch::Saturated || r.branch == RateBranch::FullDictionary)
                       return detail::BranchedRate{cap, r.branch};
                   return r;
               },
               [&](int k) { return detail::l0_shape(dims, k, cap); })
        .value;
}

// One-stop report used by the CLI and the harness.
struct RateReport {
    int m_ideal = 0;
    int m_eff = 0;
    double ser = 0.0;
    double reg = 0.0;
    double psi = 0.0;
    std::optional<double> phi;
    RateBranch branch = RateBranch::Interior;
};

inline RateReport rate_report(const ProblemDims& dims, const SparsityBudget& budget,
                              std::optional<int> full_rank = std::nullopt) {
    RateReport r;
    r.m_ideal = ideal_model_size(dims, budget);
    r.m_eff = effective_model_size(dims, budget);
    r.ser = search_ratio(r.m_eff, dims.M);
    r.reg = reg_rate(dims, budget);
    double s2 = dims.sigma * dims.sigma;
    detail::BranchedRate psi = detail::dispatch(
        budget, [&](double q, double t) { return detail::lq_shape(dims, q, t, s2); },
        [&](int k) { return detail::l0_shape(dims, k, s2); });
    r.psi = psi.value;
    r.branch = psi.branch;
    if (full_rank) r.phi = phi_rate(dims, budget, *full_rank);
    return r;
}

} // namespace lqagg::rates

#endif
