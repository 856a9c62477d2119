#ifndef LQAGG_ERRORS_HPP
#define LQAGG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lqagg {

// Bad arguments, malformed data, violated preconditions. CLI exit code 2.
struct validation_error : std::invalid_argument {
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Work refused because it would blow up (e.g. 2^M model enumeration). CLI exit code 3.
struct capacity_error : std::runtime_error {
    explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// A run-time failure inside an experiment (too many replicate failures, etc.). CLI exit code 3.
struct experiment_error : std::runtime_error {
    explicit experiment_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lqagg

#endif
