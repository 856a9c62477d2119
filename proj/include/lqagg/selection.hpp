#ifndef LQAGG_SELECTION_HPP
#define LQAGG_SELECTION_HPP

// Subset-model machinery for fixed design: candidate lists with descriptive
// complexities satisfying the Kraft inequality sum exp(-C_J) <= 1, least
// squares projections with numerically stable rank, and the penalized
// criteria
//
//   ABC (J)  = RSS + 2 r_J sigma^2 + lambda sigma^2 C_J          (sigma known)
//   ABC'(J)  = (1 + 2 r_J / (n - r_J)) (RSS + lambda sbar^2 C_J) (sigma <= sbar)
//
// The candidate lists always include the intercept-only null model J0 and the
// full-projection model Jbar as safety nets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lqagg/dictionary.hpp"
#include "lqagg/errors.hpp"
#include "lqagg/numeric.hpp"

namespace lqagg::selection {

enum class ModelKind { Subset, Intercept, FullProjection };

// A candidate model: an index set J into {1..M} (1-based), or one of the two
// named safety nets. The complexity C_J determines the prior exp(-C_J).
struct SubsetModel {
    ModelKind kind = ModelKind::Subset;
    std::vector<int> indices; // sorted, 1-based; empty for J0 / Jbar
    double complexity = 0.0;
    bool is_full_dictionary = false; // indices == {1..M}

    double prior() const { return std::exp(-complexity); }

    std::string label() const {
        if (kind == ModelKind::Intercept) return "J0";
        if (kind == ModelKind::FullProjection) return "Jbar";
        std::ostringstream os;
        os << '{';
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (i) os << ',';
            os << indices[i];
        }
        os << '}';
        return os.str();
    }
};

// Which ABC' candidate-list regime applies.
enum class ListRegime {
    AbcAll,            // ABC / MLS list (all subset sizes, J_M, J0, Jbar)
    SmallDictionary,   // ABC' with M <= n/2
    HighRank,          // ABC' with M > n/2 and r_M >= n/2 (no full model)
    LowRank            // ABC' with M > n/2 and r_M < n/2 (full model included)
};

struct ModelList {
    std::vector<SubsetModel> models;
    int M = 0;
    int n = 0;
    ListRegime regime = ListRegime::AbcAll;
    bool rank_boundary = false; // r_M sits exactly at n/2
    double kraft_sum = 0.0;
};

enum class ListPurpose { ABC, ABC_prime, MLS };

namespace detail {

inline void append_subsets_of_size(std::vector<SubsetModel>& out, int M, int m,
                                   double complexity) {
    std::vector<int> idx(m);
    for (int i = 0; i < m; ++i) idx[i] = i + 1;
    while (true) {
        SubsetModel model;
        model.kind = ModelKind::Subset;
        model.indices = idx;
        model.complexity = complexity;
        model.is_full_dictionary = (m == M);
        out.push_back(std::move(model));
        // next combination in lexicographic order
        int i = m - 1;
        while (i >= 0 && idx[i] == M - (m - 1 - i)) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
}

inline SubsetModel named_model(ModelKind kind, double complexity) {
    SubsetModel m;
    m.kind = kind;
    m.complexity = complexity;
    return m;
}

inline SubsetModel full_dictionary_model(int M, double complexity) {
    SubsetModel m;
    m.kind = ModelKind::Subset;
    m.indices.resize(M);
    for (int i = 0; i < M; ++i) m.indices[i] = i + 1;
    m.complexity = complexity;
    m.is_full_dictionary = true;
    return m;
}

} // namespace detail

inline constexpr int kEnumerationCap = 25;

// Candidate lists with their complexity assignments.
//
//   ABC / MLS : subsets of size 1..(M-1)^n with C = -log .85 + log((M-1)^n)
//               + log C(M,m); the full model J_M, J0 and Jbar at -log .05.
//   ABC'      : three regimes keyed on (M <= n/2, r_M >= n/2) with constants
//               -log .85 / -log .8 / -log .1 / -log .05 and log(M-1) vs
//               log floor(n/2).
inline ModelList enumerate_models(int M, int n, ListPurpose purpose, int full_rank) {
    if (M < 1) throw validation_error("enumerate_models: M must be >= 1");
    if (n < 2) throw validation_error("enumerate_models: n must be >= 2");
    if (full_rank < 0 || full_rank > std::min(M, n))
        throw validation_error("enumerate_models: full_rank out of range");
    if (M > kEnumerationCap)
        throw capacity_error("enumerate_models: M exceeds the exhaustive enumeration cap (" +
                             std::to_string(kEnumerationCap) + "); supply an explicit model list");

    ModelList list;
    list.M = M;
    list.n = n;

    auto subset_complexity = [&](int m, double mass, int size_count) {
        return -std::log(mass) + std::log(static_cast<double>(size_count)) +
               numeric::log_binomial(M, m);
    };

    if (purpose == ListPurpose::ABC || purpose == ListPurpose::MLS) {
        list.regime = ListRegime::AbcAll;
        int size_count = std::min(M - 1, n);
        for (int m = 1; m <= size_count; ++m)
            detail::append_subsets_of_size(list.models, M, m,
                                           subset_complexity(m, 0.85, size_count));
        list.models.push_back(detail::full_dictionary_model(M, -std::log(0.05)));
        list.models.push_back(detail::named_model(ModelKind::Intercept, -std::log(0.05)));
        list.models.push_back(detail::named_model(ModelKind::FullProjection, -std::log(0.05)));
    } else {
        list.rank_boundary = (2 * full_rank == n);
        if (2 * M <= n) {
            list.regime = ListRegime::SmallDictionary;
            int size_count = M - 1;
            for (int m = 1; m < M; ++m)
                detail::append_subsets_of_size(list.models, M, m,
                                               subset_complexity(m, 0.85, size_count));
            list.models.push_back(detail::full_dictionary_model(M, -std::log(0.05)));
            list.models.push_back(detail::named_model(ModelKind::Intercept, -std::log(0.05)));
            list.models.push_back(detail::named_model(ModelKind::FullProjection, -std::log(0.05)));
        } else if (2 * full_rank >= n) {
            list.regime = ListRegime::HighRank;
            int max_size = std::min(n / 2, M);
            for (int m = 1; m <= max_size; ++m)
                detail::append_subsets_of_size(list.models, M, m,
                                               subset_complexity(m, 0.8, n / 2));
            list.models.push_back(detail::named_model(ModelKind::Intercept, -std::log(0.1)));
            list.models.push_back(detail::named_model(ModelKind::FullProjection, -std::log(0.1)));
        } else {
            list.regime = ListRegime::LowRank;
            int max_size = std::min(n / 2, M);
            for (int m = 1; m <= max_size; ++m)
                detail::append_subsets_of_size(list.models, M, m,
                                               subset_complexity(m, 0.85, n / 2));
            list.models.push_back(detail::full_dictionary_model(M, -std::log(0.05)));
            list.models.push_back(detail::named_model(ModelKind::Intercept, -std::log(0.05)));
            list.models.push_back(detail::named_model(ModelKind::FullProjection, -std::log(0.05)));
        }
    }

    double kraft = 0.0;
    for (const SubsetModel& m : list.models) {
        if (!(m.complexity > 0.0)) throw validation_error("enumerate_models: C_J must be positive");
        kraft += std::exp(-m.complexity);
    }
    list.kraft_sum = kraft;
    if (kraft > 1.0 + 1e-9)
        throw validation_error("enumerate_models: Kraft inequality violated");
    return list;
}

// Wrap explicitly supplied index sets (1-based) with the ABC complexity
// scheme; the Kraft sum over a sub-collection can only shrink.
inline ModelList models_from_sets(const std::vector<std::vector<int>>& sets, int M, int n,
                                  bool include_named = true) {
    if (M < 1 || n < 2) throw validation_error("models_from_sets: bad dims");
    ModelList list;
    list.M = M;
    list.n = n;
    list.regime = ListRegime::AbcAll;
    int size_count = std::min(M - 1, n);
    for (const auto& raw : sets) {
        std::vector<int> idx = raw;
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        if (idx.empty()) throw validation_error("models_from_sets: empty index set");
        if (idx.front() < 1 || idx.back() > M)
            throw validation_error("models_from_sets: index outside 1..M");
        SubsetModel m;
        m.kind = ModelKind::Subset;
        m.is_full_dictionary = (static_cast<int>(idx.size()) == M);
        int sz = static_cast<int>(idx.size());
        m.complexity = m.is_full_dictionary
                           ? -std::log(0.05)
                           : -std::log(0.85) + std::log(static_cast<double>(size_count)) +
                                 numeric::log_binomial(M, sz);
        m.indices = std::move(idx);
        list.models.push_back(std::move(m));
    }
    if (include_named) {
        list.models.push_back(detail::named_model(ModelKind::Intercept, -std::log(0.05)));
        list.models.push_back(detail::named_model(ModelKind::FullProjection, -std::log(0.05)));
    }
    double kraft = 0.0;
    for (const SubsetModel& m : list.models) kraft += std::exp(-m.complexity);
    list.kraft_sum = kraft;
    if (kraft > 1.0 + 1e-9) throw validation_error("models_from_sets: Kraft inequality violated");
    return list;
}

struct FitResult {
    Eigen::VectorXd projection;   // Yhat_J, length n
    double rss = 0.0;             // ||Y - Yhat_J||^2, unnormalized
    int rank = 0;
    Eigen::VectorXd coefficients; // minimal-norm solution over J (diagnostic)
};

// Rank threshold: directions with singular value <= 1e-10 x largest are
// dropped, so r_J (which enters the penalties) is reproducible.
inline constexpr double kRankTolerance = 1e-10;

// Orthonormal basis of the column span of one model, reusable across many
// responses on a fixed design.
struct ModelBasis {
    Eigen::MatrixXd Q; // n x r, orthonormal columns; empty for Jbar
    ModelKind kind = ModelKind::Subset;
    int rank = 0;
    Eigen::MatrixXd solve_back; // maps Q^T Y to minimal-norm coefficients
};

inline ModelBasis build_basis(const Eigen::MatrixXd& design, const SubsetModel& model) {
    const Eigen::Index n = design.rows();
    ModelBasis basis;
    basis.kind = model.kind;
    switch (model.kind) {
        case ModelKind::FullProjection:
            basis.rank = static_cast<int>(n);
            return basis;
        case ModelKind::Intercept: {
            basis.Q = Eigen::MatrixXd::Constant(n, 1, 1.0 / std::sqrt(static_cast<double>(n)));
            basis.rank = 1;
            basis.solve_back = Eigen::MatrixXd::Constant(1, 1, 1.0 / std::sqrt(static_cast<double>(n)));
            return basis;
        }
        case ModelKind::Subset: {
            Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(model.indices.size()));
            for (std::size_t j = 0; j < model.indices.size(); ++j) {
                int col = model.indices[j];
                if (col < 1 || col > design.cols())
                    throw validation_error("project: model index outside the design");
                sub.col(static_cast<Eigen::Index>(j)) = design.col(col - 1);
            }
            if (!sub.allFinite()) throw validation_error("project: non-finite design entries");
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub, Eigen::ComputeThinU | Eigen::ComputeThinV);
            double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
            int r = 0;
            while (r < svd.singularValues().size() &&
                   svd.singularValues()[r] > kRankTolerance * smax && svd.singularValues()[r] > 0.0)
                ++r;
            basis.rank = r;
            basis.Q = svd.matrixU().leftCols(r);
            // theta = V diag(1/s) Q^T y restricted to the retained directions
            Eigen::MatrixXd V = svd.matrixV().leftCols(r);
            Eigen::VectorXd inv = svd.singularValues().head(r).cwiseInverse();
            basis.solve_back = V * inv.asDiagonal();
            return basis;
        }
    }
    throw validation_error("build_basis: bad kind");
}

inline FitResult project_with_basis(const ModelBasis& basis, const Eigen::VectorXd& y) {
    FitResult fit;
    fit.rank = basis.rank;
    if (basis.kind == ModelKind::FullProjection) {
        fit.projection = y;
        fit.rss = 0.0;
        return fit;
    }
    Eigen::VectorXd z = basis.Q.transpose() * y;
    fit.projection = basis.Q * z;
    fit.rss = (y - fit.projection).squaredNorm();
    if (basis.solve_back.size()) fit.coefficients = basis.solve_back * z;
    return fit;
}

// Least squares projection of Y onto the span of model J.
inline FitResult project(const Dictionary& design, const Eigen::VectorXd& y,
                         const SubsetModel& model) {
    if (y.size() != design.n_eval())
        throw validation_error("project: response length != design rows");
    if (!y.allFinite()) throw validation_error("project: non-finite response");
    ModelBasis basis = build_basis(design.columns, model);
    if (model.kind == ModelKind::FullProjection) {
        FitResult fit;
        fit.projection = y;
        fit.rss = 0.0;
        fit.rank = static_cast<int>(y.size());
        return fit;
    }
    return project_with_basis(basis, y);
}

// Precompute every model's basis once for a fixed design; Monte Carlo loops
// then project each fresh response in O(n r) per model.
inline std::vector<ModelBasis> build_bases(const Eigen::MatrixXd& design, const ModelList& list) {
    std::vector<ModelBasis> bases;
    bases.reserve(list.models.size());
    for (const SubsetModel& m : list.models) bases.push_back(build_basis(design, m));
    return bases;
}

struct SelectionConfig {
    double lambda = 0.0;
    double sigma = 0.0; // known sigma for ABC; upper bound sigma_bar for ABC'

    static SelectionConfig abc(double sigma, std::optional<double> lambda = std::nullopt) {
        SelectionConfig c;
        c.sigma = sigma;
        c.lambda = lambda.value_or(5.1 * std::log(2.0));
        if (!(sigma > 0.0)) throw validation_error("abc config: sigma must be positive");
        if (c.lambda < 5.1 * std::log(2.0) - 1e-12)
            throw validation_error("abc config: lambda must be >= 5.1 log 2");
        return c;
    }
    static SelectionConfig abc_prime(double sigma_bar, std::optional<double> lambda = std::nullopt) {
        SelectionConfig c;
        c.sigma = sigma_bar;
        c.lambda = lambda.value_or(40.0 * std::log(2.0));
        if (!(sigma_bar > 0.0)) throw validation_error("abc' config: sigma_bar must be positive");
        if (c.lambda < 40.0 * std::log(2.0) - 1e-12)
            throw validation_error("abc' config: lambda must be >= 40 log 2");
        return c;
    }
};

inline double abc_score(const SubsetModel& model, const FitResult& fit,
                        const SelectionConfig& config, int n) {
    double s2 = config.sigma * config.sigma;
    // Jbar and J0 reduce to the same expression through rss and rank
    (void)n;
    return fit.rss + 2.0 * fit.rank * s2 + config.lambda * s2 * model.complexity;
}

inline double abc_prime_score(const SubsetModel& model, const FitResult& fit,
                              const SelectionConfig& config, int n) {
    double s2 = config.sigma * config.sigma;
    if (model.kind == ModelKind::FullProjection)
        return (1.0 + 2.0 * n) * config.lambda * s2 * model.complexity;
    if (fit.rank >= n)
        throw validation_error("abc_prime_score: rank reached n for a non-Jbar model");
    double multiplier = 1.0 + 2.0 * fit.rank / static_cast<double>(n - fit.rank);
    return multiplier * (fit.rss + config.lambda * s2 * model.complexity);
}

struct ScoreRow {
    SubsetModel model;
    double rss = 0.0;
    int rank = 0;
    double score = 0.0;
};

struct SelectionResult {
    SubsetModel chosen;
    Eigen::VectorXd fitted;
    std::vector<ScoreRow> table;
};

namespace detail {

// Deterministic tie order: smaller complexity first, then kind, then
// lexicographic index set. Independent of evaluation order.
inline bool tie_before(const SubsetModel& a, const SubsetModel& b) {
    if (a.complexity != b.complexity) return a.complexity < b.complexity;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.indices < b.indices;
}

} // namespace detail

// Generic plug-in selection: score every model in the list with `score_fn`
// and take the deterministic argmin. ABC, ABC' and any user-supplied penalty
// (e.g. a BGH-style criterion) share this plumbing.
template <typename ScoreFn>
inline SelectionResult select_by(const Dictionary& design, const Eigen::VectorXd& y,
                                 const ModelList& list, ScoreFn&& score_fn) {
    if (list.models.empty()) throw validation_error("select_by: empty candidate list");
    SelectionResult result;
    result.table.reserve(list.models.size());
    std::size_t best = 0;
    bool have_best = false;
    for (std::size_t i = 0; i < list.models.size(); ++i) {
        const SubsetModel& model = list.models[i];
        FitResult fit = project(design, y, model);
        ScoreRow row;
        row.model = model;
        row.rss = fit.rss;
        row.rank = fit.rank;
        row.score = score_fn(model, fit, static_cast<int>(y.size()));
        if (i == 0 || row.score < result.table[best].score ||
            (row.score == result.table[best].score &&
             detail::tie_before(model, result.table[best].model))) {
            best = i;
            have_best = true;
            result.fitted = fit.projection;
        }
        result.table.push_back(std::move(row));
    }
    if (!have_best) throw experiment_error("select_by: no candidate scored");
    result.chosen = result.table[best].model;
    return result;
}

// Monte Carlo fast path: argmin over a list whose bases were precomputed
// with build_bases. Same scoring and tie rule as select_by.
template <typename ScoreFn>
inline std::pair<std::size_t, FitResult> argmin_with_bases(const ModelList& list,
                                                           const std::vector<ModelBasis>& bases,
                                                           const Eigen::VectorXd& y,
                                                           ScoreFn&& score_fn) {
    if (list.models.size() != bases.size() || list.models.empty())
        throw validation_error("argmin_with_bases: list/bases mismatch");
    std::size_t best = 0;
    double best_score = 0.0;
    FitResult best_fit;
    for (std::size_t i = 0; i < list.models.size(); ++i) {
        FitResult fit = project_with_basis(bases[i], y);
        double score = score_fn(list.models[i], fit, static_cast<int>(y.size()));
        if (i == 0 || score < best_score ||
            (score == best_score && detail::tie_before(list.models[i], list.models[best]))) {
            best = i;
            best_score = score;
            best_fit = std::move(fit);
        }
    }
    return {best, std::move(best_fit)};
}

inline SelectionResult abc_select(const Dictionary& design, const Eigen::VectorXd& y,
                                  const SelectionConfig& config) {
    int full_rank = std::min<int>(static_cast<int>(design.size()),
                                  static_cast<int>(design.n_eval()));
    ModelList list = enumerate_models(static_cast<int>(design.size()),
                                      static_cast<int>(y.size()), ListPurpose::ABC, full_rank);
    return select_by(design, y, list, [&](const SubsetModel& m, const FitResult& f, int n) {
        return abc_score(m, f, config, n);
    });
}

inline SelectionResult abc_prime_select(const Dictionary& design, const Eigen::VectorXd& y,
                                        const SelectionConfig& config) {
    SubsetModel full = detail::full_dictionary_model(static_cast<int>(design.size()), 1.0);
    ModelBasis full_basis = build_basis(design.columns, full);
    ModelList list = enumerate_models(static_cast<int>(design.size()),
                                      static_cast<int>(y.size()), ListPurpose::ABC_prime,
                                      full_basis.rank);
    return select_by(design, y, list, [&](const SubsetModel& m, const FitResult& f, int n) {
        return abc_prime_score(m, f, config, n);
    });
}

inline nlohmann::json score_table_to_json(const std::vector<ScoreRow>& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const ScoreRow& row : table) {
        nlohmann::json r;
        r["indices"] = row.model.indices;
        r["label"] = row.model.label();
        r["rank"] = row.rank;
        r["complexity"] = row.model.complexity;
        r["rss"] = row.rss;
        r["score"] = row.score;
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace lqagg::selection

#endif
