#pragma once

// One-sided two-sample tests. Orientation is fixed throughout: `a` holds the
// original-prompt scores, `b` the perturbed-prompt scores, and the alternative
// is "b is smaller". Small p means evidence that the perturbation hurts.

#include <span>
#include <string_view>
#include <vector>

namespace protip::stattests {

enum class TestKind { WelchT, MannWhitneyU };

std::string_view to_string(TestKind kind);

struct TestResult {
    double statistic = 0.0;
    double z_equivalent = 0.0;  // inverse-normal of (1 - p)
    double p_one_sided = 0.5;
    TestKind kind = TestKind::WelchT;
    double df = 0.0;          // Welch-Satterthwaite degrees of freedom; 0 for U
    bool degenerate = false;  // no information either way, p fixed at 0.5
};

// Throws InvalidInput when a sample has fewer than two values or a non-finite entry.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

enum class UMethod { Auto, Exact, Normal };

// Exact enumeration when |a| + |b| <= 12 (Auto); otherwise normal approximation
// with tie and continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          UMethod method = UMethod::Auto);

inline constexpr std::size_t kExactUThreshold = 12;

struct NormalityResult {
    double statistic = 0.0;
    double p = 0.0;
};

// D'Agostino-Pearson K^2. Throws InsufficientSample below 20 values and
// DegenerateSample for a zero-variance sample.
NormalityResult normality_k2(std::span<const double> s);

inline constexpr std::size_t kMinNormalitySample = 20;

double p_to_z(double p_one_sided);

}  // namespace protip::stattests
