#include "protip/stattests.hpp"

#include "protip/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace protip::stattests {

namespace {

void check_finite(std::span<const double> s, const char* name) {
    for (double v : s) {
        PROTIP_REQUIRE(std::isfinite(v), ErrorCode::InvalidInput, std::string(name) + " has a non-finite value");
    }
}

double mean_of(std::span<const double> s) {
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double var_of(std::span<const double> s, double mean) {
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(s.size() - 1);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Midranks of the pooled sample a ++ b, plus the tie term sum(t^3 - t).
std::vector<double> pooled_ranks(std::span<const double> a, std::span<const double> b, double& tie_term) {
    const std::size_t n = a.size() + b.size();
    std::vector<std::pair<double, std::size_t>> v;
    v.reserve(n);
    for (std::size_t i = 0; i < a.size(); ++i) v.emplace_back(a[i], i);
    for (std::size_t i = 0; i < b.size(); ++i) v.emplace_back(b[i], a.size() + i);
    std::sort(v.begin(), v.end());
    std::vector<double> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && v[j + 1].first == v[i].first) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[v[k].second] = r;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

// P(U_b <= observed) over all equally likely assignments of the pooled ranks.
double exact_lower_p(const std::vector<double>& ranks, std::size_t nb, double observed_rank_sum) {
    const std::size_t n = ranks.size();
    std::vector<bool> pick(n, false);
    std::fill(pick.end() - static_cast<std::ptrdiff_t>(nb), pick.end(), true);
    std::uint64_t total = 0;
    std::uint64_t hits = 0;
    do {
        double rs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pick[i]) rs += ranks[i];
        }
        ++total;
        if (rs <= observed_rank_sum + 1e-9) ++hits;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

std::string_view to_string(TestKind kind) {
    return kind == TestKind::WelchT ? "welch_t" : "mann_whitney_u";
}

double p_to_z(double p_one_sided) {
    const double p = std::clamp(p_one_sided, 1e-300, 1.0 - 1e-16);
    return boost::math::quantile(boost::math::complement(boost::math::normal(), p));
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
    PROTIP_REQUIRE(a.size() >= 2 && b.size() >= 2, ErrorCode::InvalidInput, "welch_t needs at least 2 values per group");
    check_finite(a, "sample a");
    check_finite(b, "sample b");
    TestResult r;
    r.kind = TestKind::WelchT;
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = var_of(a, ma) / static_cast<double>(a.size());
    const double vb = var_of(b, mb) / static_cast<double>(b.size());
    const double se2 = va + vb;
    if (se2 <= 0.0) {
        if (ma == mb) {
            r.degenerate = true;
            r.p_one_sided = 0.5;
            r.z_equivalent = 0.0;
            return r;
        }
        r.statistic = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p_one_sided = ma > mb ? 0.0 : 1.0;
        r.z_equivalent = p_to_z(r.p_one_sided);
        return r;
    }
    r.statistic = (ma - mb) / std::sqrt(se2);
    const double na1 = static_cast<double>(a.size()) - 1.0;
    const double nb1 = static_cast<double>(b.size()) - 1.0;
    r.df = se2 * se2 / (va * va / na1 + vb * vb / nb1);
    const boost::math::students_t dist(r.df);
    r.p_one_sided = boost::math::cdf(boost::math::complement(dist, r.statistic));
    r.z_equivalent = p_to_z(r.p_one_sided);
    return r;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, UMethod method) {
    PROTIP_REQUIRE(!a.empty() && !b.empty(), ErrorCode::InvalidInput, "mann_whitney_u needs non-empty samples");
    check_finite(a, "sample a");
    check_finite(b, "sample b");
    TestResult r;
    r.kind = TestKind::MannWhitneyU;
    double tie_term = 0.0;
    const auto ranks = pooled_ranks(a, b, tie_term);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;
    double rank_sum_b = 0.0;
    for (std::size_t i = a.size(); i < ranks.size(); ++i) rank_sum_b += ranks[i];
    r.statistic = rank_sum_b - nb * (nb + 1.0) / 2.0;

    const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(variance > 0.0)) {
        r.degenerate = true;
        r.p_one_sided = 0.5;
        r.z_equivalent = 0.0;
        return r;
    }
    const bool exact = method == UMethod::Exact ||
                       (method == UMethod::Auto && a.size() + b.size() <= kExactUThreshold);
    if (exact) {
        PROTIP_REQUIRE(a.size() + b.size() <= 24, ErrorCode::InvalidInput, "exact U enumeration limited to 24 values");
        r.p_one_sided = exact_lower_p(ranks, b.size(), rank_sum_b);
    } else {
        const double z = (r.statistic - na * nb / 2.0 + 0.5) / std::sqrt(variance);
        r.p_one_sided = std::clamp(normal_cdf(z), 0.0, 1.0);
    }
    r.z_equivalent = p_to_z(r.p_one_sided);
    return r;
}

NormalityResult normality_k2(std::span<const double> s) {
    PROTIP_REQUIRE(s.size() >= kMinNormalitySample, ErrorCode::InsufficientSample,
                   "normality test needs at least 20 values");
    check_finite(s, "sample");
    const double n = static_cast<double>(s.size());
    const double m = mean_of(s);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : s) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    PROTIP_REQUIRE(m2 > 1e-14 * std::max(1.0, m * m), ErrorCode::DegenerateSample, "zero-variance sample");

    // Skewness component.
    const double b1 = m3 / std::pow(m2, 1.5);
    double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
    const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                         ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
    const double alpha = std::sqrt(2.0 / (w2 - 1.0));
    if (y == 0.0) y = 1.0;
    const double z_skew = delta * std::log(y / alpha + std::sqrt((y / alpha) * (y / alpha) + 1.0));

    // Kurtosis component (Anscombe-Glynn).
    const double b2 = m4 / (m2 * m2);
    const double e = 3.0 * (n - 1.0) / (n + 1.0);
    const double varb2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    const double x = (b2 - e) / std::sqrt(varb2);
    const double sqrtbeta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                             std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
    const double A = 6.0 + 8.0 / sqrtbeta1 * (2.0 / sqrtbeta1 + std::sqrt(1.0 + 4.0 / (sqrtbeta1 * sqrtbeta1)));
    const double term1 = 1.0 - 2.0 / (9.0 * A);
    const double denom = 1.0 + x * std::sqrt(2.0 / (A - 4.0));
    const double term2 = (denom < 0 ? -1.0 : 1.0) * std::cbrt((1.0 - 2.0 / A) / std::abs(denom));
    const double z_kurt = (term1 - term2) / std::sqrt(2.0 / (9.0 * A));

    NormalityResult r;
    r.statistic = z_skew * z_skew + z_kurt * z_kurt;
    r.p = std::exp(-0.5 * r.statistic);  // chi-square(2) survival
    return r;
}

}  // namespace protip::stattests
