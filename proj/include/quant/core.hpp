#pragma once
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace quant {

template <typename S> using VecX = Eigen::Vector<S, Eigen::Dynamic>;
template <typename S> using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = VecX<double>;
using Mat = MatX<double>;
using VecI = Eigen::VectorXi;
using Index = Eigen::Index;

// Domain error: recoverable, maps to exit code 1 at the CLI boundary.
struct QuantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw QuantError(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

}  // namespace quant
