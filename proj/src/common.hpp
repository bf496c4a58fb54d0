#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace actigeo {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// Planar point set, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

enum class ErrorKind { validation, runtime };

// Single exception type for the whole library. `validation` marks bad inputs
// or configs (CLI exit code 2), `runtime` marks failures during computation
// (exit code 1).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
    throw Error(ErrorKind::validation, msg);
}

[[noreturn]] inline void fail_runtime(const std::string& msg) {
    throw Error(ErrorKind::runtime, msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail_validation(msg);
}

}  // namespace actigeo
