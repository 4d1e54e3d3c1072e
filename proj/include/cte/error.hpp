#pragma once

#include <stdexcept>
#include <string>

namespace cte {

/// Failure categories reported by the library. The CLI maps these onto exit codes.
enum class errc {
    domain,            // argument outside the mathematical domain
    infinite_mean,     // tail index <= 1
    degenerate_sample, // tied / non-positive order statistics, empty input
    non_convergence,   // CML solver exhausted its iteration budget
    numerical_domain,  // damping could not keep every G_i positive
    singularity,       // alpha_hat == beta_hat in the Hall coefficients
    unusable_fit,      // c_hat <= 0 or fit not converged
    level_conflict,    // t incompatible with 1 - k/n
    invalid_config,    // Monte Carlo / CLI configuration problem
};

inline const char* to_string(errc code) noexcept {
    switch (code) {
    case errc::domain: return "domain";
    case errc::infinite_mean: return "infinite_mean";
    case errc::degenerate_sample: return "degenerate_sample";
    case errc::non_convergence: return "non_convergence";
    case errc::numerical_domain: return "numerical_domain";
    case errc::singularity: return "singularity";
    case errc::unusable_fit: return "unusable_fit";
    case errc::level_conflict: return "level_conflict";
    case errc::invalid_config: return "invalid_config";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

namespace detail {
[[noreturn]] inline void fail(errc code, const std::string& what) {
    throw error(code, what);
}
} // namespace detail

} // namespace cte
