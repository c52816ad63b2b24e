#pragma once

// Outer loop: fixed-n and adaptive Hoeffding bounds on the robustness
// estimate, and the sequential pass/fail rule.

#include <string_view>
#include <utility>

namespace protip::concentration {

// sqrt(ln(2/sigma) / (2n))
double eps_hoeffding(long n, double sigma);

// sqrt((0.6 ln(log_1.1 n + 1) + ln(24/sigma) / 1.8) / n), valid at a stopping time.
double eps_adaptive(long n, double sigma);

enum class BoundKind { Adaptive, Hoeffding };

struct RobustnessEstimate {
    long n = 0;
    long successes = 0;
    double mu_hat = 0.0;
    double sigma = 0.05;
    double epsilon = 0.0;      // +inf while n == 0
    double lower_bound = 0.0;  // clamp(mu_hat - epsilon, 0, 1)
    BoundKind bound = BoundKind::Adaptive;

    double raw_lower_bound() const { return mu_hat - epsilon; }

    static RobustnessEstimate make(long successes, long n, double sigma, BoundKind bound);
};

struct VerificationTarget {
    double b_l = 0.8;
    double sigma = 0.05;
    long j_max = 400;

    void validate() const;
};

enum class Decision { Continue, Pass, Fail };

std::string_view to_string(Decision d);

std::pair<RobustnessEstimate, Decision> update_and_decide(const RobustnessEstimate& est, int indicator,
                                                          const VerificationTarget& target);

}  // namespace protip::concentration
