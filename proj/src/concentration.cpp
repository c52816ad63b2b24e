#include "protip/concentration.hpp"

#include "protip/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace protip::concentration {

namespace {

void check_args(long n, double sigma) {
    PROTIP_REQUIRE(n >= 1, ErrorCode::InvalidInput, "sample count must be >= 1");
    PROTIP_REQUIRE(std::isfinite(sigma) && sigma > 0.0 && sigma < 1.0, ErrorCode::InvalidInput,
                   "sigma must lie in (0,1)");
}

}  // namespace

double eps_hoeffding(long n, double sigma) {
    check_args(n, sigma);
    return std::sqrt(std::log(2.0 / sigma) / (2.0 * static_cast<double>(n)));
}

double eps_adaptive(long n, double sigma) {
    check_args(n, sigma);
    const double nd = static_cast<double>(n);
    const double log_base_11 = std::log(nd) / std::log(1.1);
    const double numerator = 0.6 * std::log(log_base_11 + 1.0) + std::log(24.0 / sigma) / 1.8;
    return std::sqrt(numerator / nd);
}

RobustnessEstimate RobustnessEstimate::make(long successes, long n, double sigma, BoundKind bound) {
    PROTIP_REQUIRE(n >= 0 && successes >= 0 && successes <= n, ErrorCode::InvalidInput,
                   "successes must lie in [0, n]");
    RobustnessEstimate e;
    e.n = n;
    e.successes = successes;
    e.sigma = sigma;
    e.bound = bound;
    if (n == 0) {
        e.epsilon = std::numeric_limits<double>::infinity();
        return e;
    }
    e.mu_hat = static_cast<double>(successes) / static_cast<double>(n);
    e.epsilon = bound == BoundKind::Adaptive ? eps_adaptive(n, sigma) : eps_hoeffding(n, sigma);
    e.lower_bound = std::clamp(e.mu_hat - e.epsilon, 0.0, 1.0);
    return e;
}

void VerificationTarget::validate() const {
    PROTIP_REQUIRE(std::isfinite(b_l) && b_l >= 0.0 && b_l <= 1.0, ErrorCode::InvalidInput, "b_l must lie in [0,1]");
    PROTIP_REQUIRE(std::isfinite(sigma) && sigma > 0.0 && sigma < 1.0, ErrorCode::InvalidInput,
                   "sigma must lie in (0,1)");
    PROTIP_REQUIRE(j_max >= 1, ErrorCode::InvalidInput, "j_max must be >= 1");
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Continue: return "continue";
        case Decision::Pass: return "pass";
        case Decision::Fail: return "fail";
    }
    return "unknown";
}

std::pair<RobustnessEstimate, Decision> update_and_decide(const RobustnessEstimate& est, int indicator,
                                                          const VerificationTarget& target) {
    PROTIP_REQUIRE(indicator == 0 || indicator == 1, ErrorCode::InvalidInput, "indicator must be 0 or 1");
    PROTIP_REQUIRE(est.n < target.j_max, ErrorCode::InvalidInput, "estimate already at j_max");
    auto next = RobustnessEstimate::make(est.successes + indicator, est.n + 1, target.sigma, BoundKind::Adaptive);
    // The pass rule uses the unclamped bound.
    if (next.raw_lower_bound() >= target.b_l) return {next, Decision::Pass};
    if (next.n >= target.j_max) return {next, Decision::Fail};
    return {next, Decision::Continue};
}

}  // namespace protip::concentration
