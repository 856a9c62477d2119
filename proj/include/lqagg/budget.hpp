#ifndef LQAGG_BUDGET_HPP
#define LQAGG_BUDGET_HPP

#include <cmath>
#include <optional>
#include <string>

#include "lqagg/errors.hpp"

namespace lqagg {

// Which sparsity constraint is active: a soft lq ball (0 < q <= 1), a hard
// support bound (q = 0), or both at once.
enum class ConstraintCase { LqOnly, L0Only, Joint };

inline std::string to_string(ConstraintCase c) {
    switch (c) {
        case ConstraintCase::LqOnly: return "lq_only";
        case ConstraintCase::L0Only: return "l0_only";
        case ConstraintCase::Joint: return "joint";
    }
    return "?";
}

// The constraint triple (q, t, k) selecting the target hull.
struct SparsityBudget {
    double q = 1.0;
    std::optional<double> t;  // radius, required when q > 0
    std::optional<int> k;     // support bound, required when q = 0 or Joint
    ConstraintCase constraint_case = ConstraintCase::LqOnly;

    static SparsityBudget lq(double q, double t) {
        SparsityBudget b;
        b.q = q;
        b.t = t;
        b.constraint_case = ConstraintCase::LqOnly;
        return b;
    }
    static SparsityBudget l0(int k) {
        SparsityBudget b;
        b.q = 0.0;
        b.k = k;
        b.constraint_case = ConstraintCase::L0Only;
        return b;
    }
    static SparsityBudget joint(double q, double t, int k) {
        SparsityBudget b;
        b.q = q;
        b.t = t;
        b.k = k;
        b.constraint_case = ConstraintCase::Joint;
        return b;
    }

    void validate(int M) const {
        if (!(q >= 0.0 && q <= 1.0)) throw validation_error("budget: q must lie in [0, 1]");
        switch (constraint_case) {
            case ConstraintCase::LqOnly:
                if (q <= 0.0) throw validation_error("budget: lq case needs q > 0");
                if (!t || !(*t > 0.0)) throw validation_error("budget: lq case needs t > 0");
                break;
            case ConstraintCase::L0Only:
                if (q != 0.0) throw validation_error("budget: l0 case requires q = 0");
                if (!k) throw validation_error("budget: l0 case needs k");
                break;
            case ConstraintCase::Joint:
                if (q <= 0.0) throw validation_error("budget: joint case needs q > 0");
                if (!t || !(*t > 0.0)) throw validation_error("budget: joint case needs t > 0");
                if (!k) throw validation_error("budget: joint case needs k");
                break;
        }
        if (k && (*k < 1 || *k > M)) throw validation_error("budget: k must satisfy 1 <= k <= M");
    }
};

// Sample size, dictionary size, noise level. tau = sigma^-2 is the precision.
struct ProblemDims {
    int n = 0;
    int M = 0;
    double sigma = 1.0;
    double tau = 1.0;

    static ProblemDims make(int n, int M, double sigma) {
        if (n < 2) throw validation_error("dims: n must be >= 2");
        if (M < 1) throw validation_error("dims: M must be >= 1");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw validation_error("dims: sigma must be positive");
        ProblemDims d;
        d.n = n;
        d.M = M;
        d.sigma = sigma;
        d.tau = 1.0 / (sigma * sigma);
        return d;
    }

    void validate() const {
        if (n < 2 || M < 1 || !(sigma > 0.0)) throw validation_error("dims: invalid");
        if (std::abs(tau * sigma * sigma - 1.0) > 1e-12)
            throw validation_error("dims: tau must equal sigma^-2");
    }
};

} // namespace lqagg

#endif
