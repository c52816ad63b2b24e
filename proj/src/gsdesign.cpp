#include "protip/gsdesign.hpp"

#include "protip/error.hpp"

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace protip::gsdesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfWidth = 8.0;

double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
double lower_tail(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double z_quantile_upper(double p) {
    return boost::math::quantile(boost::math::complement(boost::math::normal(), p));
}

// Sub-density of Z_k on the continuation region of stage k, held on a Simpson grid.
struct StageGrid {
    double sqrt_t = 1.0;
    std::vector<double> z;
    std::vector<double> weighted;  // simpson weight * density
};

class Recursion {
public:
    Recursion(const std::vector<double>& info, double drift) : info_(info), drift_(drift) {}

    // P(Z_k > c, continued through k-1) and P(Z_k < f, continued through k-1).
    double exit_upper(std::size_t k, const StageGrid* prev, double c) const {
        if (!std::isfinite(c)) return c < 0 ? mass(k, prev) : 0.0;
        if (prev == nullptr) return upper_tail(c - drift_ * std::sqrt(info_[0]));
        const auto [dt, mean_shift] = increment(k);
        const double st = std::sqrt(info_[k]);
        const double sdt = std::sqrt(dt);
        double acc = 0.0;
        for (std::size_t j = 0; j < prev->z.size(); ++j) {
            acc += prev->weighted[j] * upper_tail((c * st - prev->z[j] * prev->sqrt_t - mean_shift) / sdt);
        }
        return acc;
    }

    double exit_lower(std::size_t k, const StageGrid* prev, double f) const {
        if (!std::isfinite(f)) return f > 0 ? mass(k, prev) : 0.0;
        if (prev == nullptr) return lower_tail(f - drift_ * std::sqrt(info_[0]));
        const auto [dt, mean_shift] = increment(k);
        const double st = std::sqrt(info_[k]);
        const double sdt = std::sqrt(dt);
        double acc = 0.0;
        for (std::size_t j = 0; j < prev->z.size(); ++j) {
            acc += prev->weighted[j] * lower_tail((f * st - prev->z[j] * prev->sqrt_t - mean_shift) / sdt);
        }
        return acc;
    }

    // Continuation sub-density at stage k over (lower, upper).
    StageGrid advance(std::size_t k, const StageGrid* prev, double lower, double upper) const {
        StageGrid out;
        out.sqrt_t = std::sqrt(info_[k]);
        const double mean = drift_ * out.sqrt_t;
        const double a = std::max(lower, mean - kHalfWidth);
        const double b = std::min(upper, mean + kHalfWidth);
        if (!(b > a)) return out;
        std::size_t intervals = static_cast<std::size_t>(std::ceil((b - a) / detail::kGridSpacing));
        intervals = std::max<std::size_t>(2, intervals + (intervals % 2));
        const double h = (b - a) / static_cast<double>(intervals);
        out.z.resize(intervals + 1);
        out.weighted.resize(intervals + 1);
        for (std::size_t i = 0; i <= intervals; ++i) out.z[i] = a + h * static_cast<double>(i);

        if (prev == nullptr) {
            for (std::size_t i = 0; i <= intervals; ++i) out.weighted[i] = pdf(out.z[i] - mean);
        } else {
            const auto [dt, mean_shift] = increment(k);
            const double sdt = std::sqrt(dt);
            const double scale = out.sqrt_t / sdt;
            for (std::size_t i = 0; i <= intervals; ++i) {
                const double s = out.z[i] * out.sqrt_t - mean_shift;
                double acc = 0.0;
                for (std::size_t j = 0; j < prev->z.size(); ++j) {
                    acc += prev->weighted[j] * pdf((s - prev->z[j] * prev->sqrt_t) / sdt);
                }
                out.weighted[i] = acc * scale;
            }
        }
        for (std::size_t i = 0; i <= intervals; ++i) {
            const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            out.weighted[i] *= w * h / 3.0;
        }
        return out;
    }

private:
    std::pair<double, double> increment(std::size_t k) const {
        const double dt = info_[k] - info_[k - 1];
        return {dt, drift_ * dt};
    }

    double mass(std::size_t k, const StageGrid* prev) const {
        (void)k;
        if (prev == nullptr) return 1.0;
        double acc = 0.0;
        for (double w : prev->weighted) acc += w;
        return acc;
    }

    const std::vector<double>& info_;
    double drift_;
};

// Root of a monotone function on [lo, hi]. f(lo) and f(hi) must differ in sign.
double solve(const std::function<double(double)>& f, double lo, double hi, const char* what) {
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) {
        std::ostringstream os;
        os << what << ": root not bracketed on [" << lo << ", " << hi << "], f=(" << flo << ", " << fhi << ")";
        throw Error(ErrorCode::NumericalFailure, os.str());
    }
    std::uintmax_t max_iter = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) < detail::kRootTolerance; };
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
    if (max_iter >= 200) {
        std::ostringstream os;
        os << what << ": root-finder did not converge, bracket [" << a << ", " << b << "]";
        throw Error(ErrorCode::NumericalFailure, os.str());
    }
    return 0.5 * (a + b);
}

std::vector<double> efficacy_bounds(const std::vector<double>& info, const std::vector<double>& alpha_spend) {
    const Recursion rec(info, 0.0);
    std::vector<double> bounds;
    StageGrid grid;
    const StageGrid* prev = nullptr;
    double spent = 0.0;
    for (std::size_t k = 0; k < info.size(); ++k) {
        const double target = alpha_spend[k] - spent;
        const double c = solve([&](double x) { return rec.exit_upper(k, prev, x) - target; }, -2.0, 12.0,
                               "efficacy boundary");
        bounds.push_back(c);
        spent = alpha_spend[k];
        grid = rec.advance(k, prev, -kInf, c);
        prev = &grid;
    }
    return bounds;
}

struct FutilityFit {
    std::vector<double> bounds;  // K-1
    double final_accept = 0.0;   // P(reach K, Z_K < c_K)
};

FutilityFit futility_bounds(const std::vector<double>& info, const std::vector<double>& efficacy,
                            const std::vector<double>& beta_spend, double drift) {
    const Recursion rec(info, drift);
    FutilityFit fit;
    StageGrid grid;
    const StageGrid* prev = nullptr;
    double spent = 0.0;
    const std::size_t K = info.size();
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const double target = beta_spend[k] - spent;
        auto g = [&](double x) { return rec.exit_lower(k, prev, x) - target; };
        double f;
        if (g(efficacy[k]) <= 0.0) {
            f = efficacy[k];
        } else {
            f = solve(g, drift * std::sqrt(info[k]) - 12.0, efficacy[k], "futility boundary");
        }
        fit.bounds.push_back(f);
        spent = beta_spend[k];
        grid = rec.advance(k, prev, f, efficacy[k]);
        prev = &grid;
    }
    fit.final_accept = rec.exit_lower(K - 1, prev, efficacy[K - 1]);
    return fit;
}

ExitProbabilities integrate_exits(const std::vector<double>& info, const std::vector<double>& efficacy,
                                  const std::vector<double>& futility, double drift) {
    const Recursion rec(info, drift);
    ExitProbabilities out;
    out.drift = drift;
    StageGrid grid;
    const StageGrid* prev = nullptr;
    const std::size_t K = info.size();
    for (std::size_t k = 0; k < K; ++k) {
        out.efficacy_by_stage.push_back(std::clamp(rec.exit_upper(k, prev, efficacy[k]), 0.0, 1.0));
        if (k + 1 < K) {
            out.futility_by_stage.push_back(std::clamp(rec.exit_lower(k, prev, futility[k]), 0.0, 1.0));
            grid = rec.advance(k, prev, futility[k], efficacy[k]);
            prev = &grid;
        } else {
            out.final_accept = std::clamp(rec.exit_lower(k, prev, efficacy[k]), 0.0, 1.0);
        }
    }
    return out;
}

void validate(const DesignInput& in, const std::vector<double>& info) {
    PROTIP_REQUIRE(in.stages >= 1, ErrorCode::InvalidInput, "stage count must be >= 1");
    PROTIP_REQUIRE(in.alpha > 0.0 && in.alpha < 0.5, ErrorCode::InvalidInput, "alpha must lie in (0, 0.5)");
    PROTIP_REQUIRE(in.beta > 0.0 && in.beta < 0.5, ErrorCode::InvalidInput, "beta must lie in (0, 0.5)");
    PROTIP_REQUIRE(std::isfinite(in.effect) && in.effect > 0.0, ErrorCode::InvalidInput, "effect must be > 0");
    PROTIP_REQUIRE(std::isfinite(in.sd) && in.sd > 0.0, ErrorCode::InvalidInput, "sd must be > 0");
    PROTIP_REQUIRE(static_cast<int>(info.size()) == in.stages, ErrorCode::InvalidInput,
                   "info_rates length must equal the stage count");
    double last = 0.0;
    for (double t : info) {
        PROTIP_REQUIRE(t > last && t <= 1.0, ErrorCode::InvalidInput, "info_rates must increase within (0,1]");
        last = t;
    }
    PROTIP_REQUIRE(std::abs(info.back() - 1.0) < 1e-12, ErrorCode::InvalidInput, "info_rates must end at 1");
}

// Total subjects of a fixed two-sample t-test (equal allocation) reaching power 1 - beta.
double fixed_t_subjects(double alpha, double beta, double effect, double sd) {
    const double delta = effect / sd;
    auto power_gap = [&](double n_total) {
        const double df = n_total - 2.0;
        const double crit = boost::math::quantile(boost::math::complement(boost::math::students_t(df), alpha));
        const double ncp = delta * std::sqrt(n_total / 4.0);
        const double power = boost::math::cdf(boost::math::complement(boost::math::non_central_t(df, ncp), crit));
        return power - (1.0 - beta);
    };
    return solve(power_gap, 3.0, 1e7, "fixed sample size");
}

}  // namespace

double pocock_spend(double t, double total) {
    PROTIP_REQUIRE(std::isfinite(t) && t > 0.0 && t <= 1.0, ErrorCode::InvalidInput,
                   "information fraction must lie in (0,1]");
    PROTIP_REQUIRE(std::isfinite(total) && total > 0.0 && total < 1.0, ErrorCode::InvalidInput,
                   "total error rate must lie in (0,1)");
    return total * std::log(1.0 + (std::numbers::e - 1.0) * t);
}

double DesignPlan::drift_h1() const { return std::sqrt(shift); }

int DesignPlan::per_group_increment(int stage) const {
    PROTIP_REQUIRE(stage >= 1 && stage <= stages, ErrorCode::InvalidInput, "stage out of range");
    const int prev = stage == 1 ? 0 : cumulative_per_group[static_cast<std::size_t>(stage - 2)];
    return cumulative_per_group[static_cast<std::size_t>(stage - 1)] - prev;
}

double ExitProbabilities::total_efficacy() const {
    double s = 0.0;
    for (double p : efficacy_by_stage) s += p;
    return s;
}

double ExitProbabilities::total_futility() const {
    double s = 0.0;
    for (double p : futility_by_stage) s += p;
    return s;
}

DesignPlan build_plan(const DesignInput& input) {
    std::vector<double> info = input.info_rates;
    if (info.empty()) {
        PROTIP_REQUIRE(input.stages >= 1, ErrorCode::InvalidInput, "stage count must be >= 1");
        for (int k = 1; k <= input.stages; ++k) info.push_back(static_cast<double>(k) / input.stages);
        info.back() = 1.0;
    }
    validate(input, info);
    const auto K = static_cast<std::size_t>(input.stages);

    DesignPlan plan;
    plan.stages = input.stages;
    plan.info_rates = info;
    plan.alpha = input.alpha;
    plan.beta = input.beta;
    plan.effect = input.effect;
    plan.sd = input.sd;
    plan.sizing = input.sizing;

    for (double t : info) {
        plan.alpha_spend.push_back(pocock_spend(t, input.alpha));
        plan.beta_spend.push_back(pocock_spend(t, input.beta));
    }
    plan.alpha_spend.back() = input.alpha;
    plan.beta_spend.back() = input.beta;

    // Non-binding: efficacy bounds ignore futility.
    plan.efficacy_z = efficacy_bounds(info, plan.alpha_spend);

    // Drift chosen so the beta budget is exhausted exactly at the final analysis.
    const double z_a = z_quantile_upper(input.alpha);
    const double z_b = z_quantile_upper(input.beta);
    const double beta_last = plan.beta_spend.back() - (K > 1 ? plan.beta_spend[K - 2] : 0.0);
    auto final_gap = [&](double drift) {
        return futility_bounds(info, plan.efficacy_z, plan.beta_spend, drift).final_accept - beta_last;
    };
    const double guess = z_a + z_b;
    const double drift = solve(final_gap, 0.25 * guess, 4.0 * guess + 4.0, "design drift");
    plan.futility_z = futility_bounds(info, plan.efficacy_z, plan.beta_spend, drift).bounds;

    plan.shift = drift * drift;
    plan.fixed_shift = guess * guess;
    plan.inflation = plan.shift / plan.fixed_shift;

    for (double c : plan.efficacy_z) plan.stage_levels.push_back(upper_tail(c));
    for (double f : plan.futility_z) plan.futility_p.push_back(upper_tail(f));

    const auto h1 = integrate_exits(info, plan.efficacy_z, plan.futility_z, drift);
    double cum = 0.0;
    for (double p : h1.efficacy_by_stage) {
        cum += p;
        plan.power.push_back(cum);
    }

    const double var_scale = 4.0 * input.sd * input.sd / (input.effect * input.effect);
    plan.max_subjects_normal = plan.shift * var_scale;
    plan.fixed_subjects = fixed_t_subjects(input.alpha, input.beta, input.effect, input.sd);
    plan.max_subjects = plan.fixed_subjects * plan.inflation;

    const auto h0 = integrate_exits(info, plan.efficacy_z, plan.futility_z, 0.0);
    plan.expected_subjects_h0 = expected_subjects(plan, h0);
    plan.expected_subjects_h1 = expected_subjects(plan, h1);

    const double per_group = plan.max_subjects / 2.0;
    int last = 0;
    if (input.sizing == StageSizing::UniformCeil) {
        const int m = static_cast<int>(std::ceil(per_group / static_cast<double>(K)));
        for (std::size_t k = 1; k <= K; ++k) plan.cumulative_per_group.push_back(m * static_cast<int>(k));
    } else {
        for (double t : info) {
            int n = static_cast<int>(std::lround(per_group * t));
            n = std::max({n, last + 1, 2});
            plan.cumulative_per_group.push_back(n);
            last = n;
        }
    }
    return plan;
}

ExitProbabilities crossing_probabilities(const DesignPlan& plan, double drift) {
    PROTIP_REQUIRE(plan.stages >= 1 && plan.efficacy_z.size() == static_cast<std::size_t>(plan.stages),
                   ErrorCode::InvalidInput, "plan has no boundaries");
    PROTIP_REQUIRE(std::isfinite(drift), ErrorCode::InvalidInput, "drift must be finite");
    return integrate_exits(plan.info_rates, plan.efficacy_z, plan.futility_z, drift);
}

double expected_subjects(const DesignPlan& plan, const ExitProbabilities& exits) {
    const auto K = static_cast<std::size_t>(plan.stages);
    double acc = 0.0;
    double stopped = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const double p = exits.efficacy_by_stage[k] + exits.futility_by_stage[k];
        acc += p * plan.info_rates[k];
        stopped += p;
    }
    acc += (1.0 - stopped) * 1.0;
    return acc * plan.max_subjects;
}

}  // namespace protip::gsdesign
