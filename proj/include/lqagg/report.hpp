#ifndef LQAGG_REPORT_HPP
#define LQAGG_REPORT_HPP

// Report documents: JSON with stable (sorted) field ordering, plus a flat
// CSV rendering whose numeric cells reuse the exact JSON token for each
// value, so the two formats agree digit for digit.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lqagg/errors.hpp"
#include "lqagg/harness.hpp"
#include "lqagg/version.hpp"

namespace lqagg::report {

using nlohmann::json;

inline json make_report(const json& resolved_config, std::uint64_t seed, json payload) {
    json doc;
    doc["meta"]["version"] = version_string;
    doc["meta"]["seed"] = seed;
    doc["meta"]["config"] = resolved_config;
    doc["results"] = std::move(payload);
    return doc;
}

inline json risk_report_to_json(const harness::RiskReport& r) {
    json j;
    j["estimator"] = r.estimator_id;
    j["mean_risk"] = r.mean_risk;
    j["std_err"] = r.std_err;
    j["replicates"] = r.replicates;
    j["failures"] = r.failures;
    if (r.oracle) j["oracle"] = *r.oracle;
    if (r.rate_prediction) j["rate_prediction"] = *r.rate_prediction;
    if (r.ratio) j["ratio"] = *r.ratio;
    return j;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline void flatten(const json& node, const std::string& path, std::ostringstream& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it)
            flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            flatten(node[i], path + "[" + std::to_string(i) + "]", out);
    } else if (node.is_string()) {
        out << csv_escape(path) << ',' << csv_escape(node.get<std::string>()) << '\n';
    } else {
        // numbers/bools/null: reuse the JSON token verbatim
        out << csv_escape(path) << ',' << node.dump() << '\n';
    }
}

} // namespace detail

// "key,value" rows in depth-first document order.
inline std::string to_csv(const json& doc) {
    std::ostringstream out;
    out << "key,value\n";
    detail::flatten(doc, "", out);
    return out.str();
}

inline std::string render(const json& doc, const std::string& format) {
    if (format == "json") return doc.dump(2) + "\n";
    if (format == "csv") return to_csv(doc);
    throw validation_error("unknown report format: " + format);
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw experiment_error("cannot open output file: " + path);
    out << content;
}

} // namespace lqagg::report

#endif
