#ifndef LQAGG_DICTIONARY_HPP
#define LQAGG_DICTIONARY_HPP

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lqagg/errors.hpp"

namespace lqagg {

// How the per-column norms were obtained: exact empirical L2 norms over the
// evaluation rows, or a Monte Carlo estimate of the population norm.
enum class NormKind { Empirical, MonteCarlo };

// An evaluated dictionary: rows are evaluation points (or design points),
// columns are the dictionary elements / predictors being combined.
struct Dictionary {
    Eigen::MatrixXd columns;   // n_eval x M
    Eigen::VectorXd col_norms; // length M
    NormKind norm_kind = NormKind::Empirical;

    Eigen::Index n_eval() const { return columns.rows(); }
    Eigen::Index size() const { return columns.cols(); }

    // ||v||_n^2 = mean of squares over evaluation rows.
    double sq_norm_n(const Eigen::VectorXd& v) const {
        return v.squaredNorm() / static_cast<double>(columns.rows());
    }

    Eigen::VectorXd evaluate(const Eigen::VectorXd& theta) const {
        if (theta.size() != columns.cols())
            throw validation_error("dictionary: coefficient length != number of columns");
        return columns * theta;
    }

    static Dictionary empirical(Eigen::MatrixXd m) {
        Dictionary d;
        if (m.rows() < 1 || m.cols() < 1) throw validation_error("dictionary: empty matrix");
        if (!m.allFinite()) throw validation_error("dictionary: non-finite entries");
        d.col_norms = (m.colwise().squaredNorm() / static_cast<double>(m.rows()))
                          .cwiseSqrt()
                          .transpose();
        d.columns = std::move(m);
        d.norm_kind = NormKind::Empirical;
        return d;
    }

    static Dictionary monte_carlo(Eigen::MatrixXd m) {
        Dictionary d = empirical(std::move(m));
        d.norm_kind = NormKind::MonteCarlo;
        return d;
    }

    void validate() const {
        if (!columns.allFinite()) throw validation_error("dictionary: non-finite entries");
        if (col_norms.size() != columns.cols())
            throw validation_error("dictionary: norm vector length mismatch");
        if (norm_kind == NormKind::Empirical) {
            for (Eigen::Index j = 0; j < columns.cols(); ++j) {
                double expect = std::sqrt(columns.col(j).squaredNorm() / columns.rows());
                if (std::abs(col_norms[j] - expect) > 1e-10)
                    throw validation_error("dictionary: stale empirical column norms");
            }
        }
    }
};

} // namespace lqagg

#endif
