#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ftsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Thrown when parameters or assembled matrices violate a model invariant.
struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an iterative solve (Newton, bisection, ...) fails.
struct solve_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on malformed configuration input.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity is controlled by the FTSIM_LOG environment variable
/// (quiet|warn|info|debug). Default: warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FTSIM_LOG");
        if (!env) return LogLevel::warn;
        const std::string v(env);
        if (v == "quiet") return LogLevel::quiet;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

template <class... Args>
void log(LogLevel lvl, Args&&... args) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[ftsim] " << os.str() << "\n";
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double d) { return d * kPi / 180.0; }

}  // namespace ftsim
