// lqagg command-line front end.
//
// Subcommands: rates, approx, select, mix, simulate, sweep. Every report
// echoes the fully resolved configuration, the seed, and the library version
// so a run can be reproduced from its output alone. Wall-clock timing goes to
// stderr; report files are byte-deterministic for a given seed and config.
//
// Exit codes: 0 success, 2 validation error, 3 runtime/capacity error.

#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqagg/budget.hpp"
#include "lqagg/csv.hpp"
#include "lqagg/dictionary.hpp"
#include "lqagg/errors.hpp"
#include "lqagg/harness.hpp"
#include "lqagg/maurey.hpp"
#include "lqagg/mixing.hpp"
#include "lqagg/rates.hpp"
#include "lqagg/report.hpp"
#include "lqagg/selection.hpp"
#include "lqagg/version.hpp"

using nlohmann::json;
using namespace lqagg;

namespace {

struct OutputOptions {
    std::string out_path; // empty = stdout
    std::string format = "json";
};

void add_output_options(CLI::App* cmd, OutputOptions& opts) {
    cmd->add_option("--out", opts.out_path, "output file (default: stdout)");
    cmd->add_option("--format", opts.format, "report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

void emit(const json& doc, const OutputOptions& opts) {
    std::string rendered = report::render(doc, opts.format);
    if (opts.out_path.empty())
        std::cout << rendered;
    else
        report::write_file(opts.out_path, rendered);
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array()) throw validation_error(what + ": expected a JSON array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
}

SparsityBudget budget_from_options(double q, bool q_explicit, std::optional<double> t,
                                   std::optional<int> k) {
    if (t && k) return SparsityBudget::joint(q, *t, *k);
    if (t) return SparsityBudget::lq(q, *t);
    if (k) {
        if (q_explicit && q > 0.0)
            throw validation_error("budget: q > 0 with k but no t; a joint budget needs --t");
        return SparsityBudget::l0(*k);
    }
    throw validation_error("budget: supply --t (with --q > 0) and/or --k");
}

// ---------------------------------------------------------------- rates ----

struct RatesArgs {
    int n = 0, M = 0;
    double sigma = 1.0;
    double q = 1.0;
    bool q_explicit = false;
    std::optional<double> t;
    std::optional<int> k;
    std::optional<int> rank;
    OutputOptions out;
};

int run_rates(const RatesArgs& a) {
    ProblemDims dims = ProblemDims::make(a.n, a.M, a.sigma);
    SparsityBudget budget = budget_from_options(a.q, a.q_explicit, a.t, a.k);
    rates::RateReport r = rates::rate_report(dims, budget, a.rank);

    json config{{"command", "rates"}, {"n", a.n},     {"M", a.M},
                {"sigma", a.sigma},   {"q", budget.q}};
    if (budget.t) config["t"] = *budget.t;
    if (budget.k) config["k"] = *budget.k;
    if (a.rank) config["rank"] = *a.rank;

    json results{{"m_ideal", r.m_ideal}, {"m_eff", r.m_eff},  {"ser", r.ser},
                 {"reg", r.reg},         {"psi", r.psi},      {"branch", to_string(r.branch)},
                 {"case", to_string(budget.constraint_case)}};
    if (r.phi) results["phi"] = *r.phi;

    emit(report::make_report(config, 0, results), a.out);
    return 0;
}

// ---------------------------------------------------------------- approx ---

struct ApproxArgs {
    std::string coeffs_csv;
    std::string design_csv;
    std::string target_csv;
    double t = 0.0, q = 1.0;
    int m = 0;
    int max_draws = 1000;
    std::uint64_t seed = 0;
    bool seed_set = false;
    OutputOptions out;
};

int run_approx(const ApproxArgs& a) {
    if (!a.seed_set) throw validation_error("approx: --seed is required (randomized rounding)");
    Eigen::VectorXd c = csv::read_vector_file(a.coeffs_csv);

    Dictionary dict = [&] {
        if (!a.design_csv.empty()) return Dictionary::empirical(csv::read_matrix_file(a.design_csv));
        // default: an orthonormal coordinate dictionary of matching size
        Eigen::Index M = c.size();
        Eigen::MatrixXd eye =
            std::sqrt(static_cast<double>(M)) * Eigen::MatrixXd::Identity(M, M);
        return Dictionary::empirical(std::move(eye));
    }();
    if (dict.size() != c.size())
        throw validation_error("approx: coefficient length != dictionary columns");

    Eigen::VectorXd target =
        a.target_csv.empty() ? Eigen::VectorXd(dict.evaluate(c)) : csv::read_vector_file(a.target_csv);

    maurey::SparseApproxResult res =
        maurey::maurey_round(dict, c, a.t, a.m, a.q, target, a.seed, a.max_draws);

    json config{{"command", "approx"}, {"coeffs", a.coeffs_csv},
                {"design", a.design_csv.empty() ? json(nullptr) : json(a.design_csv)},
                {"target", a.target_csv.empty() ? json("f_c") : json(a.target_csv)},
                {"t", a.t}, {"q", a.q}, {"m", a.m},
                {"max_draws", a.max_draws}, {"seed", a.seed}};
    json results{{"theta", vector_to_json(res.theta)},
                 {"l1_norm", res.l1_norm},
                 {"support", res.support},
                 {"achieved_excess", res.achieved_excess},
                 {"bound", res.bound},
                 {"draws_used", res.draws_used}};
    emit(report::make_report(config, a.seed, results), a.out);
    return 0;
}

// ---------------------------------------------------------------- select ---

struct SelectArgs {
    std::string criterion; // abc | abcp
    std::string design_csv;
    std::string response_csv;
    std::optional<double> sigma;
    std::optional<double> sigma_bar;
    std::optional<double> lambda;
    OutputOptions out;
};

int run_select(const SelectArgs& a) {
    Eigen::MatrixXd X = csv::read_matrix_file(a.design_csv);
    Eigen::VectorXd y = csv::read_vector_file(a.response_csv);
    if (X.cols() < 1) throw validation_error("select: design has no columns");
    if (X.rows() != y.size()) throw validation_error("select: design/response length mismatch");
    Dictionary design = Dictionary::empirical(std::move(X));

    selection::SelectionResult result;
    json config{{"command", "select"},
                {"criterion", a.criterion},
                {"design", a.design_csv},
                {"response", a.response_csv}};
    if (a.criterion == "abc") {
        if (!a.sigma) throw validation_error("select: --sigma is required for the abc criterion");
        selection::SelectionConfig cfg = selection::SelectionConfig::abc(*a.sigma, a.lambda);
        config["sigma"] = cfg.sigma;
        config["lambda"] = cfg.lambda;
        result = selection::abc_select(design, y, cfg);
    } else if (a.criterion == "abcp") {
        if (!a.sigma_bar)
            throw validation_error("select: --sigma-bar is required for the abcp criterion");
        selection::SelectionConfig cfg = selection::SelectionConfig::abc_prime(*a.sigma_bar, a.lambda);
        config["sigma_bar"] = cfg.sigma;
        config["lambda"] = cfg.lambda;
        result = selection::abc_prime_select(design, y, cfg);
    } else {
        throw validation_error("select: unknown criterion " + a.criterion);
    }

    json results{{"chosen", {{"label", result.chosen.label()},
                             {"indices", result.chosen.indices},
                             {"complexity", result.chosen.complexity}}},
                 {"fitted", vector_to_json(result.fitted)},
                 {"table", selection::score_table_to_json(result.table)}};
    emit(report::make_report(config, 0, results), a.out);
    return 0;
}

// ------------------------------------------------------------------ mix ----

struct MixArgs {
    std::string algo; // mls | arm | catoni
    std::string design_csv;
    std::string response_csv;
    std::string predictions_csv;
    std::string priors_csv;
    std::optional<double> sigma;       // mls
    std::optional<double> sigma_known; // arm
    std::optional<double> sigma_lo, sigma_hi;
    std::optional<double> sup_bound;   // catoni L
    std::optional<double> alpha, u_alpha, v_alpha;
    std::optional<double> gaussian_sigma_bar;
    OutputOptions out;
};

int run_mix(const MixArgs& a) {
    json config{{"command", "mix"}, {"algo", a.algo}};
    json results;

    if (a.algo == "mls") {
        if (!a.sigma) throw validation_error("mix: --sigma is required for mls");
        Eigen::MatrixXd X = csv::read_matrix_file(a.design_csv);
        Eigen::VectorXd y = csv::read_vector_file(a.response_csv);
        if (X.cols() < 1) throw validation_error("mix: design has no columns");
        if (X.rows() != y.size()) throw validation_error("mix: design/response length mismatch");
        Dictionary design = Dictionary::empirical(X);
        int full_rank = std::min<int>(static_cast<int>(X.cols()), static_cast<int>(X.rows()));
        selection::ModelList list = selection::enumerate_models(
            static_cast<int>(X.cols()), static_cast<int>(y.size()), selection::ListPurpose::MLS,
            full_rank);
        std::vector<selection::FitResult> fits;
        fits.reserve(list.models.size());
        for (const auto& m : list.models) fits.push_back(selection::project(design, y, m));
        mixing::MlsResult res = mixing::mls_aggregate(list.models, y, fits, *a.sigma);
        config["design"] = a.design_csv;
        config["response"] = a.response_csv;
        config["sigma"] = *a.sigma;
        json labels = json::array();
        for (const auto& m : list.models) labels.push_back(m.label());
        results["labels"] = labels;
        results["weights"] = vector_to_json(res.weights.weights);
        results["combined"] = vector_to_json(res.combined);
    } else if (a.algo == "arm" || a.algo == "catoni") {
        Eigen::MatrixXd preds = csv::read_matrix_file(a.predictions_csv);
        Eigen::VectorXd y = csv::read_vector_file(a.response_csv);
        if (preds.rows() != y.size())
            throw validation_error("mix: prediction rows must match observations");
        mixing::CandidateSet candidates;
        candidates.predictions = preds.transpose(); // file is n x N, one column per candidate
        Eigen::Index N = candidates.predictions.rows();
        if (!a.priors_csv.empty()) {
            candidates.priors = csv::read_vector_file(a.priors_csv);
        } else {
            candidates.priors = Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N));
        }
        for (Eigen::Index k = 0; k < N; ++k)
            candidates.labels.push_back("candidate_" + std::to_string(k + 1));
        config["predictions"] = a.predictions_csv;
        config["response"] = a.response_csv;
        config["priors"] = a.priors_csv.empty() ? json("uniform") : json(a.priors_csv);

        mixing::WeightVector w;
        if (a.algo == "arm") {
            mixing::ArmConfig cfg = a.sigma_known
                                        ? mixing::ArmConfig::known(*a.sigma_known)
                                        : mixing::ArmConfig::banded(a.sigma_lo.value_or(0.0),
                                                                    a.sigma_hi.value_or(0.0));
            config["sigma_known"] = a.sigma_known ? json(*a.sigma_known) : json(nullptr);
            config["sigma_lo"] = cfg.sigma_lo;
            config["sigma_hi"] = cfg.sigma_hi;
            w = mixing::arm_aggregate(candidates, y, cfg);
        } else {
            if (!a.sup_bound) throw validation_error("mix: --L is required for catoni");
            mixing::CatoniConfig cfg;
            if (a.alpha && a.u_alpha && a.v_alpha) {
                cfg.alpha = *a.alpha;
                cfg.u_alpha = *a.u_alpha;
                cfg.v_alpha = *a.v_alpha;
                cfg.sup_bound = *a.sup_bound;
                cfg.validate();
            } else if (a.gaussian_sigma_bar) {
                cfg = mixing::CatoniConfig::for_gaussian(*a.gaussian_sigma_bar, *a.sup_bound,
                                                         a.alpha);
            } else {
                throw validation_error(
                    "mix: catoni needs --alpha/--u-alpha/--v-alpha or --gaussian-sigma-bar");
            }
            config["L"] = cfg.sup_bound;
            config["alpha"] = cfg.alpha;
            config["u_alpha"] = cfg.u_alpha;
            config["v_alpha"] = cfg.v_alpha;
            config["lambda_c"] = cfg.lambda_c();
            w = mixing::catoni_aggregate(candidates, y, cfg);
        }
        results["labels"] = candidates.labels;
        results["weights"] = vector_to_json(w.weights);
    } else {
        throw validation_error("mix: unknown algorithm " + a.algo);
    }
    emit(report::make_report(config, 0, results), a.out);
    return 0;
}

// ------------------------------------------------------- simulate / sweep --

harness::GeneratorSpec generator_from_json(const json& g, std::uint64_t seed) {
    harness::GeneratorSpec spec;
    std::string kind = g.at("kind").get<std::string>();
    if (kind == "fixed") {
        spec.kind = harness::DesignKind::Fixed;
        spec.fixed_design = csv::read_matrix_file(g.at("design_csv").get<std::string>());
    } else if (kind == "fixed_orthonormal") {
        spec.kind = harness::DesignKind::Fixed;
        spec.fixed_design = harness::make_orthonormal_design(
            g.at("n").get<int>(), g.at("M").get<int>(), g.value("design_seed", 1u));
    } else if (kind == "uniform") {
        spec.kind = harness::DesignKind::RandomUniform;
        spec.M = g.at("M").get<int>();
    } else if (kind == "orthonormal") {
        spec.kind = harness::DesignKind::RandomOrthonormal;
        spec.M = g.at("M").get<int>();
    } else {
        throw validation_error("generator: unknown kind " + kind);
    }
    spec.theta0 = vector_from_json(g.at("theta0"), "generator.theta0");
    if (g.contains("out_of_span"))
        spec.out_of_span = vector_from_json(g["out_of_span"], "generator.out_of_span");
    spec.sigma = g.value("sigma", 1.0);
    spec.sup_bound = g.value("sup_bound", 1.0);
    spec.seed = seed;
    return spec;
}

std::optional<SparsityBudget> budget_from_json(const json& cfg) {
    if (!cfg.contains("budget")) return std::nullopt;
    const json& b = cfg["budget"];
    double q = b.value("q", 0.0);
    std::optional<double> t;
    std::optional<int> k;
    if (b.contains("t")) t = b["t"].get<double>();
    if (b.contains("k")) k = b["k"].get<int>();
    return budget_from_options(q, b.contains("q"), t, k);
}

struct BuiltEstimator {
    harness::Estimator fn;
    std::string id;
    bool fixed_only = false;
    std::optional<double> oracle_lambda; // resolvability comparator, when meaningful
};

BuiltEstimator build_estimator(const json& e, const harness::GeneratorSpec& spec, int n) {
    std::string kind = e.at("kind").get<std::string>();
    BuiltEstimator built;
    built.id = kind;

    if (kind == "null") {
        built.fn = [](const harness::Dataset& ds) {
            harness::Prediction p;
            p.values = Eigen::VectorXd::Zero(ds.y.size());
            p.at_points = [](const Eigen::MatrixXd& pts) {
                return Eigen::VectorXd(Eigen::VectorXd::Zero(pts.rows()));
            };
            return p;
        };
        return built;
    }

    if (kind == "universal") {
        harness::StrategyConfig strat;
        strat.p0 = e.value("p0", 0.05);
        strat.sup_bound = e.value("L", spec.sup_bound);
        strat.sigma_hint = e.value("sigma_hint", spec.sigma);
        std::string agg = e.value("aggregator", std::string("catoni"));
        if (agg == "catoni") {
            strat.aggregator = harness::StrategyConfig::Aggregator::Catoni;
            if (e.contains("alpha"))
                strat.catoni = mixing::CatoniConfig::for_gaussian(strat.sigma_hint,
                                                                  strat.sup_bound,
                                                                  e["alpha"].get<double>());
        } else if (agg == "arm") {
            strat.aggregator = harness::StrategyConfig::Aggregator::ARM;
            if (e.contains("sigma_lo") && e.contains("sigma_hi"))
                strat.arm = mixing::ArmConfig::banded(e["sigma_lo"].get<double>(),
                                                      e["sigma_hi"].get<double>());
        } else {
            throw validation_error("estimator: unknown aggregator " + agg);
        }
        built.id = "universal_" + agg;
        int M = spec.columns();
        built.fn = [strat, M](const harness::Dataset& ds) {
            return harness::universal_aggregate(ds, M, strat).prediction;
        };
        return built;
    }

    if (kind == "abc" || kind == "abc_prime" || kind == "mls") {
        built.fixed_only = true;
        if (spec.kind != harness::DesignKind::Fixed)
            throw validation_error("estimator: " + kind + " runs on fixed designs only");
        auto design = std::make_shared<Dictionary>(Dictionary::empirical(spec.fixed_design));
        auto full = selection::detail::full_dictionary_model(spec.columns(), 1.0);
        int full_rank = selection::build_basis(spec.fixed_design, full).rank;

        if (kind == "abc") {
            selection::SelectionConfig cfg = selection::SelectionConfig::abc(
                e.at("sigma").get<double>(),
                e.contains("lambda") ? std::optional<double>(e["lambda"].get<double>())
                                     : std::nullopt);
            auto list = std::make_shared<selection::ModelList>(selection::enumerate_models(
                spec.columns(), n, selection::ListPurpose::ABC, full_rank));
            auto bases = std::make_shared<std::vector<selection::ModelBasis>>(
                selection::build_bases(spec.fixed_design, *list));
            built.oracle_lambda = cfg.lambda;
            built.fn = [cfg, list, bases](const harness::Dataset& ds) {
                auto [idx, fit] = selection::argmin_with_bases(
                    *list, *bases, ds.y,
                    [&](const selection::SubsetModel& m, const selection::FitResult& f, int nn) {
                        return selection::abc_score(m, f, cfg, nn);
                    });
                harness::Prediction p;
                p.values = std::move(fit.projection);
                return p;
            };
        } else if (kind == "abc_prime") {
            selection::SelectionConfig cfg = selection::SelectionConfig::abc_prime(
                e.at("sigma_bar").get<double>(),
                e.contains("lambda") ? std::optional<double>(e["lambda"].get<double>())
                                     : std::nullopt);
            auto list = std::make_shared<selection::ModelList>(selection::enumerate_models(
                spec.columns(), n, selection::ListPurpose::ABC_prime, full_rank));
            auto bases = std::make_shared<std::vector<selection::ModelBasis>>(
                selection::build_bases(spec.fixed_design, *list));
            built.oracle_lambda = cfg.lambda;
            built.fn = [cfg, list, bases](const harness::Dataset& ds) {
                auto [idx, fit] = selection::argmin_with_bases(
                    *list, *bases, ds.y,
                    [&](const selection::SubsetModel& m, const selection::FitResult& f, int nn) {
                        return selection::abc_prime_score(m, f, cfg, nn);
                    });
                harness::Prediction p;
                p.values = std::move(fit.projection);
                return p;
            };
        } else {
            double sigma = e.at("sigma").get<double>();
            auto list = std::make_shared<selection::ModelList>(selection::enumerate_models(
                spec.columns(), n, selection::ListPurpose::MLS, full_rank));
            auto bases = std::make_shared<std::vector<selection::ModelBasis>>(
                selection::build_bases(spec.fixed_design, *list));
            built.oracle_lambda = 4.0;
            built.fn = [sigma, list, bases](const harness::Dataset& ds) {
                harness::Prediction p;
                p.values = mixing::mls_with_bases(*list, *bases, ds.y, sigma).combined;
                return p;
            };
        }
        return built;
    }

    throw validation_error("estimator: unknown kind " + kind);
}

struct RunArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    OutputOptions out;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& err) {
        throw validation_error(std::string("config parse error: ") + err.what());
    }
    return cfg;
}

int run_simulate(const RunArgs& a) {
    if (!a.seed_set) throw validation_error("simulate: --seed is required");
    json cfg = load_config(a.config_path);
    harness::GeneratorSpec spec = generator_from_json(cfg.at("generator"), a.seed);
    int n = cfg.at("n").get<int>();
    int replicates = cfg.at("replicates").get<int>();
    int test_points = cfg.value("test_points", 10000);
    std::optional<SparsityBudget> budget = budget_from_json(cfg);

    BuiltEstimator est = build_estimator(cfg.at("estimator"), spec, n);
    harness::RiskReport rr =
        harness::estimate_risk(est.fn, est.id, spec, n, replicates, test_points, a.workers);

    if (budget) {
        ProblemDims dims = ProblemDims::make(n, spec.columns(), spec.sigma);
        if (spec.kind == harness::DesignKind::Fixed) {
            auto full = selection::detail::full_dictionary_model(spec.columns(), 1.0);
            int rank = selection::build_basis(spec.fixed_design, full).rank;
            rr.rate_prediction = rates::phi_rate(dims, *budget, std::max(rank, 1));
        } else {
            rr.rate_prediction = rates::psi_rate(dims, *budget);
        }
        if (*rr.rate_prediction > 0.0) rr.ratio = rr.mean_risk / *rr.rate_prediction;
    }
    if (est.oracle_lambda && spec.kind == harness::DesignKind::Fixed) {
        Dictionary design = Dictionary::empirical(spec.fixed_design);
        Eigen::VectorXd f0 = spec.fixed_design * spec.theta0;
        if (spec.out_of_span.size() > 0) f0 += spec.out_of_span;
        auto full = selection::detail::full_dictionary_model(spec.columns(), 1.0);
        int rank = selection::build_basis(spec.fixed_design, full).rank;
        selection::ModelList list = selection::enumerate_models(
            spec.columns(), n,
            est.id == "abc_prime" ? selection::ListPurpose::ABC_prime : selection::ListPurpose::ABC,
            rank);
        rr.oracle =
            harness::resolvability_oracle(design, f0, list, spec.sigma, *est.oracle_lambda).first;
    }

    json resolved = cfg;
    resolved["command"] = "simulate";
    resolved["seed"] = a.seed;
    resolved["test_points"] = test_points;
    emit(report::make_report(resolved, a.seed, report::risk_report_to_json(rr)), a.out);
    return 0;
}

int run_sweep(const RunArgs& a) {
    if (!a.seed_set) throw validation_error("sweep: --seed is required");
    json cfg = load_config(a.config_path);
    const json& sw = cfg.at("sweep");
    std::string axis_name = sw.at("axis").get<std::string>();

    harness::SweepConfig sc;
    if (axis_name == "n") sc.axis = harness::SweepAxis::N;
    else if (axis_name == "M") sc.axis = harness::SweepAxis::M;
    else if (axis_name == "t") sc.axis = harness::SweepAxis::T;
    else if (axis_name == "q") sc.axis = harness::SweepAxis::Q;
    else if (axis_name == "k") sc.axis = harness::SweepAxis::K;
    else throw validation_error("sweep: unknown axis " + axis_name);

    sc.grid = sw.at("grid").get<std::vector<double>>();
    sc.spec = generator_from_json(cfg.at("generator"), a.seed);
    std::optional<SparsityBudget> budget = budget_from_json(cfg);
    if (!budget) throw validation_error("sweep: a budget block is required for rate predictions");
    sc.budget = *budget;
    sc.n = cfg.at("n").get<int>();
    sc.replicates = cfg.at("replicates").get<int>();
    sc.test_points = cfg.value("test_points", 10000);
    sc.workers = a.workers;

    json est_cfg = cfg.at("estimator");
    sc.estimator_id = est_cfg.at("kind").get<std::string>();
    harness::EstimatorBuilder builder = [est_cfg](const harness::GeneratorSpec& spec, int n) {
        return build_estimator(est_cfg, spec, n).fn;
    };
    // a synthesized orthonormal fixed design can follow the n grid
    if (sc.spec.kind == harness::DesignKind::Fixed &&
        cfg["generator"].at("kind").get<std::string>() == "fixed_orthonormal") {
        int M = cfg["generator"].at("M").get<int>();
        std::uint64_t dseed = cfg["generator"].value("design_seed", 1u);
        sc.design_for_n = [M, dseed](int n) {
            return harness::make_orthonormal_design(n, M, dseed);
        };
    }

    harness::SweepResult result = harness::rate_sweep(sc, builder);
    json resolved = cfg;
    resolved["command"] = "sweep";
    resolved["seed"] = a.seed;
    json points = json::array();
    for (const auto& p : result.points) {
        json row = report::risk_report_to_json(p.report);
        row["axis_value"] = p.axis_value;
        points.push_back(std::move(row));
    }
    json results{{"axis", axis_name}, {"points", points}};
    if (result.slope) results["slope"] = *result.slope;
    emit(report::make_report(resolved, a.seed, results), a.out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    auto started = std::chrono::steady_clock::now();
    CLI::App app{std::string(version_string) +
                 " - sparse lq-hull aggregation, model selection and Monte Carlo rate checks"};
    app.require_subcommand(1);

    RatesArgs rates_args;
    auto* rates_cmd = app.add_subcommand("rates", "sparsity indices and minimax rate shapes");
    rates_cmd->add_option("--n", rates_args.n, "sample size")->required();
    rates_cmd->add_option("--M", rates_args.M, "dictionary size")->required();
    rates_cmd->add_option("--sigma", rates_args.sigma, "noise sd (default 1)");
    auto* q_opt = rates_cmd->add_option("--q", rates_args.q, "lq exponent in [0,1]");
    double t_val = 0.0;
    auto* t_opt = rates_cmd->add_option("--t", t_val, "lq radius");
    int k_val = 0;
    auto* k_opt = rates_cmd->add_option("--k", k_val, "l0 support bound");
    int rank_val = 0;
    auto* rank_opt = rates_cmd->add_option("--rank", rank_val, "full design rank for phi");
    add_output_options(rates_cmd, rates_args.out);

    ApproxArgs approx_args;
    auto* approx_cmd = app.add_subcommand("approx", "Maurey randomized sparse approximation");
    approx_cmd->add_option("--coeffs", approx_args.coeffs_csv, "coefficient CSV")->required();
    approx_cmd->add_option("--design", approx_args.design_csv,
                           "dictionary CSV (default: orthonormal coordinates)");
    approx_cmd->add_option("--target", approx_args.target_csv, "target values CSV (default: f_c)");
    approx_cmd->add_option("--t", approx_args.t, "lq radius")->required();
    approx_cmd->add_option("--q", approx_args.q, "lq exponent in (0,1]")->required();
    approx_cmd->add_option("--m", approx_args.m, "number of rounding draws")->required();
    approx_cmd->add_option("--max-draws", approx_args.max_draws, "rejection budget");
    auto* approx_seed =
        approx_cmd->add_option("--seed", approx_args.seed, "RNG seed (required)");
    add_output_options(approx_cmd, approx_args.out);

    SelectArgs select_args;
    auto* select_cmd = app.add_subcommand("select", "penalized subset selection (ABC / ABC')");
    select_cmd->add_option("--criterion", select_args.criterion, "abc or abcp")->required();
    select_cmd->add_option("--design", select_args.design_csv, "design matrix CSV")->required();
    select_cmd->add_option("--response", select_args.response_csv, "response CSV")->required();
    double sel_sigma = 0.0, sel_sigma_bar = 0.0, sel_lambda = 0.0;
    auto* sel_sigma_opt = select_cmd->add_option("--sigma", sel_sigma, "known noise sd");
    auto* sel_sigma_bar_opt =
        select_cmd->add_option("--sigma-bar", sel_sigma_bar, "upper bound on noise sd");
    auto* sel_lambda_opt = select_cmd->add_option("--lambda", sel_lambda, "penalty multiplier");
    add_output_options(select_cmd, select_args.out);

    MixArgs mix_args;
    auto* mix_cmd = app.add_subcommand("mix", "exponential-weight aggregation (MLS / ARM / Catoni)");
    mix_cmd->add_option("--algo", mix_args.algo, "mls, arm or catoni")->required();
    mix_cmd->add_option("--design", mix_args.design_csv, "design matrix CSV (mls)");
    mix_cmd->add_option("--response", mix_args.response_csv, "response CSV")->required();
    mix_cmd->add_option("--predictions", mix_args.predictions_csv,
                        "candidate predictions CSV, one column per candidate (arm/catoni)");
    mix_cmd->add_option("--priors", mix_args.priors_csv, "prior CSV (default uniform)");
    double mx_sigma = 0.0, mx_sigma_known = 0.0, mx_lo = 0.0, mx_hi = 0.0, mx_L = 0.0;
    double mx_alpha = 0.0, mx_u = 0.0, mx_v = 0.0, mx_gauss = 0.0;
    auto* mx_sigma_opt = mix_cmd->add_option("--sigma", mx_sigma, "known noise sd (mls)");
    auto* mx_known_opt = mix_cmd->add_option("--sigma-known", mx_sigma_known, "known sd (arm)");
    auto* mx_lo_opt = mix_cmd->add_option("--sigma-lo", mx_lo, "lower sd bound (arm)");
    auto* mx_hi_opt = mix_cmd->add_option("--sigma-hi", mx_hi, "upper sd bound (arm)");
    auto* mx_L_opt = mix_cmd->add_option("--L", mx_L, "sup-norm bound (catoni)");
    auto* mx_alpha_opt = mix_cmd->add_option("--alpha", mx_alpha, "catoni alpha");
    auto* mx_u_opt = mix_cmd->add_option("--u-alpha", mx_u, "catoni U_alpha");
    auto* mx_v_opt = mix_cmd->add_option("--v-alpha", mx_v, "catoni V_alpha");
    auto* mx_gauss_opt = mix_cmd->add_option("--gaussian-sigma-bar", mx_gauss,
                                             "derive catoni constants for Gaussian noise");
    add_output_options(mix_cmd, mix_args.out);

    RunArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo risk estimation from a JSON config");
    sim_cmd->add_option("--config", sim_args.config_path, "JSON experiment config")->required();
    auto* sim_seed = sim_cmd->add_option("--seed", sim_args.seed, "base seed (required)");
    sim_cmd->add_option("--workers", sim_args.workers, "replicate parallelism");
    add_output_options(sim_cmd, sim_args.out);

    RunArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "rate sweep along one axis from a JSON config");
    sweep_cmd->add_option("--config", sweep_args.config_path, "JSON experiment config")->required();
    auto* sweep_seed = sweep_cmd->add_option("--seed", sweep_args.seed, "base seed (required)");
    sweep_cmd->add_option("--workers", sweep_args.workers, "replicate parallelism");
    add_output_options(sweep_cmd, sweep_args.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    int code = 0;
    try {
        if (rates_cmd->parsed()) {
            rates_args.q_explicit = q_opt->count() > 0;
            if (*t_opt) rates_args.t = t_val;
            if (*k_opt) rates_args.k = k_val;
            if (*rank_opt) rates_args.rank = rank_val;
            code = run_rates(rates_args);
        } else if (approx_cmd->parsed()) {
            approx_args.seed_set = approx_seed->count() > 0;
            code = run_approx(approx_args);
        } else if (select_cmd->parsed()) {
            if (*sel_sigma_opt) select_args.sigma = sel_sigma;
            if (*sel_sigma_bar_opt) select_args.sigma_bar = sel_sigma_bar;
            if (*sel_lambda_opt) select_args.lambda = sel_lambda;
            code = run_select(select_args);
        } else if (mix_cmd->parsed()) {
            if (*mx_sigma_opt) mix_args.sigma = mx_sigma;
            if (*mx_known_opt) mix_args.sigma_known = mx_sigma_known;
            if (*mx_lo_opt) mix_args.sigma_lo = mx_lo;
            if (*mx_hi_opt) mix_args.sigma_hi = mx_hi;
            if (*mx_L_opt) mix_args.sup_bound = mx_L;
            if (*mx_alpha_opt) mix_args.alpha = mx_alpha;
            if (*mx_u_opt) mix_args.u_alpha = mx_u;
            if (*mx_v_opt) mix_args.v_alpha = mx_v;
            if (*mx_gauss_opt) mix_args.gaussian_sigma_bar = mx_gauss;
            code = run_mix(mix_args);
        } else if (sim_cmd->parsed()) {
            sim_args.seed_set = sim_seed->count() > 0;
            code = run_simulate(sim_args);
        } else if (sweep_cmd->parsed()) {
            sweep_args.seed_set = sweep_seed->count() > 0;
            code = run_sweep(sweep_args);
        }
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }

    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    std::cerr << "completed in " << elapsed << " ms\n";
    return code;
}
