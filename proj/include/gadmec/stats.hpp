#pragma once

// Cluster-aware inference over paired win/loss outcomes: pooled win rate,
// exact binomial contrast, vanilla cluster bootstrap, pivotal wild-cluster
// bootstrap with Webb 6-point weights, exact cluster sign-flip permutation,
// and Bonferroni family decisions. Ties are excluded before data reaches
// this module.
//
// All Monte-Carlo procedures derive each replicate's RNG state from
// (seed, replicate index), so p-values are bit-reproducible at any level of
// concurrency.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gadmec/error.hpp"
#include "gadmec/rng.hpp"

namespace gadmec::stats {

/// Binary outcomes grouped by inference cluster; 1 means the focal method
/// won the pair. Clusters keep first-appearance order.
struct ClusteredOutcomes {
    std::vector<std::string> cluster_ids;
    std::vector<std::vector<int>> outcomes;

    std::size_t n_clusters() const { return outcomes.size(); }

    std::size_t n_pairs() const {
        std::size_t n = 0;
        for (const auto& c : outcomes) n += c.size();
        return n;
    }

    long long wins() const {
        long long w = 0;
        for (const auto& c : outcomes)
            for (int y : c) w += y;
        return w;
    }

    void validate() const {
        if (outcomes.empty()) throw Error(ErrorCode::EmptyOutcomes, "no clusters");
        if (cluster_ids.size() != outcomes.size())
            throw Error(ErrorCode::EmptyOutcomes, "cluster id/outcome list mismatch");
        for (const auto& c : outcomes) {
            if (c.empty()) throw Error(ErrorCode::EmptyOutcomes, "cluster with no outcomes");
            for (int y : c) {
                if (y != 0 && y != 1)
                    throw Error(ErrorCode::ValidationError, "outcome not in {0,1}");
            }
        }
    }

    static ClusteredOutcomes from_pairs(
        const std::vector<std::pair<std::string, int>>& labeled) {
        ClusteredOutcomes out;
        std::unordered_map<std::string, std::size_t> index;
        for (const auto& [cid, y] : labeled) {
            auto it = index.find(cid);
            if (it == index.end()) {
                index.emplace(cid, out.outcomes.size());
                out.cluster_ids.push_back(cid);
                out.outcomes.push_back({y});
            } else {
                out.outcomes[it->second].push_back(y);
            }
        }
        return out;
    }

    /// Signed cluster residuals r_g = sum_i (y_gi - null), null = 0.5.
    std::vector<double> residuals(double null_value = 0.5) const {
        std::vector<double> r;
        r.reserve(outcomes.size());
        for (const auto& c : outcomes) {
            double s = 0.0;
            for (int y : c) s += static_cast<double>(y) - null_value;
            r.push_back(s);
        }
        return r;
    }

    /// Twice the residuals under null 0.5: 2*wins_g - n_g, exact integers.
    std::vector<long long> residuals_x2() const {
        std::vector<long long> r;
        r.reserve(outcomes.size());
        for (const auto& c : outcomes) {
            long long w = 0;
            for (int y : c) w += y;
            r.push_back(2 * w - static_cast<long long>(c.size()));
        }
        return r;
    }
};

enum class Side { Greater, Less };

enum class TestMethod { Vanilla, Wild, Permutation, Binomial };

inline const char* test_method_tag(TestMethod m) {
    switch (m) {
        case TestMethod::Vanilla: return "V";
        case TestMethod::Wild: return "W";
        case TestMethod::Permutation: return "P";
        default: return "BINOM";
    }
}

struct TestResult {
    TestMethod method = TestMethod::Binomial;
    double statistic = 0.0;
    double p_value = 1.0;
    std::uint64_t replicates = 0; // B for Monte-Carlo, 2^C for exact permutation
    bool exact = false;
    std::uint64_t seed = 0;
    bool has_ci = false;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

inline double win_rate(const ClusteredOutcomes& o) {
    o.validate();
    return static_cast<double>(o.wins()) / static_cast<double>(o.n_pairs());
}

/// Exact one-sided binomial tail. Long-double pmf recurrence; no special
/// functions, so results are identical across libm versions.
inline TestResult binomial_p(const ClusteredOutcomes& o, double null_value = 0.5,
                             Side side = Side::Greater) {
    o.validate();
    if (null_value <= 0.0 || null_value >= 1.0)
        throw Error(ErrorCode::ConfigurationError, "binomial null must lie in (0,1)");
    const long long n = static_cast<long long>(o.n_pairs());
    const long long k = o.wins();

    const long double p = static_cast<long double>(null_value);
    const long double q = 1.0L - p;
    long double pmf = 1.0L;
    for (long long i = 0; i < n; ++i) pmf *= q; // pmf at j=0
    long double tail = 0.0L;
    for (long long j = 0; j <= n; ++j) {
        const bool in_tail = side == Side::Greater ? j >= k : j <= k;
        if (in_tail) tail += pmf;
        pmf *= static_cast<long double>(n - j) / static_cast<long double>(j + 1) * (p / q);
    }
    if (tail > 1.0L) tail = 1.0L;
    if (tail < 0.0L) tail = 0.0L;

    TestResult r;
    r.method = TestMethod::Binomial;
    r.statistic = static_cast<double>(k) / static_cast<double>(n);
    r.p_value = static_cast<double>(tail);
    r.replicates = static_cast<std::uint64_t>(n);
    r.exact = true;
    return r;
}

namespace detail {

/// Linear-interpolation quantile over a sorted sample (the common "type 7").
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double pos = q * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) return sorted[n - 1];
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

} // namespace detail

/// Resample whole clusters with replacement, recompute the pooled win rate
/// per replicate. One-sided p for H1: WR > null uses the add-one rule
/// p = (1 + #{WR* <= null}) / (B + 1); the 95% CI is the percentile
/// interval of the replicate distribution.
inline TestResult cluster_bootstrap(const ClusteredOutcomes& o, std::uint64_t B = 10000,
                                    Side side = Side::Greater, std::uint64_t seed = 42,
                                    double null_value = 0.5) {
    o.validate();
    const std::size_t C = o.n_clusters();
    if (C < 2) throw Error(ErrorCode::TooFewClusters, "cluster bootstrap needs >= 2 clusters");
    if (B < 1) throw Error(ErrorCode::ConfigurationError, "bootstrap needs B >= 1");

    std::vector<long long> cl_wins(C), cl_n(C);
    for (std::size_t g = 0; g < C; ++g) {
        long long w = 0;
        for (int y : o.outcomes[g]) w += y;
        cl_wins[g] = w;
        cl_n[g] = static_cast<long long>(o.outcomes[g].size());
    }

    std::vector<double> reps;
    reps.reserve(B);
    std::uint64_t at_or_below = 0;
    for (std::uint64_t b = 0; b < B; ++b) {
        Rng rng = Rng::substream(seed, "stats.vanilla", b);
        long long w = 0, n = 0;
        for (std::size_t g = 0; g < C; ++g) {
            std::size_t pick = static_cast<std::size_t>(rng.uniform_below(C));
            w += cl_wins[pick];
            n += cl_n[pick];
        }
        double wr = static_cast<double>(w) / static_cast<double>(n);
        reps.push_back(wr);
        if (side == Side::Greater ? wr <= null_value : wr >= null_value) ++at_or_below;
    }
    std::sort(reps.begin(), reps.end());

    TestResult r;
    r.method = TestMethod::Vanilla;
    r.statistic = win_rate(o);
    r.p_value = static_cast<double>(1 + at_or_below) / static_cast<double>(B + 1);
    r.replicates = B;
    r.seed = seed;
    r.has_ci = true;
    r.ci_low = detail::quantile_sorted(reps, 0.025);
    r.ci_high = detail::quantile_sorted(reps, 0.975);
    return r;
}

/// Webb 6-point weights, each with probability 1/6.
inline const std::array<double, 6>& webb_weights() {
    static const std::array<double, 6> w = {
        std::sqrt(1.5), -std::sqrt(1.5), 1.0, -1.0, std::sqrt(0.5), -std::sqrt(0.5)};
    return w;
}

/// Pivotal wild-cluster bootstrap centred at the null. The cluster-robust
/// standard error uses the cluster-sum form with the C/(C-1) small-sample
/// factor: se^2 = [C/(C-1)] * sum_g r_g^2 / n^2. All residuals zero means a
/// zero se; that raises DegenerateVariance and callers fall back to the
/// permutation test.
inline TestResult wild_cluster_bootstrap(const ClusteredOutcomes& o, std::uint64_t B = 9999,
                                         double null_value = 0.5, Side side = Side::Greater,
                                         std::uint64_t seed = 42) {
    o.validate();
    const std::size_t C = o.n_clusters();
    if (C < 2) throw Error(ErrorCode::TooFewClusters, "wild bootstrap needs >= 2 clusters");
    if (B < 1) throw Error(ErrorCode::ConfigurationError, "bootstrap needs B >= 1");

    const auto r_g = o.residuals(null_value);
    const double n = static_cast<double>(o.n_pairs());
    const double factor = static_cast<double>(C) / static_cast<double>(C - 1);

    double ss = 0.0;
    for (double r : r_g) ss += r * r;
    const double se = std::sqrt(factor * ss) / n;
    if (se == 0.0)
        throw Error(ErrorCode::DegenerateVariance,
                    "all cluster residuals are zero; wild bootstrap undefined");

    const double wr = win_rate(o);
    const double t_obs = (wr - null_value) / se;

    const auto& webb = webb_weights();
    std::uint64_t extreme = 0;
    for (std::uint64_t b = 0; b < B; ++b) {
        Rng rng = Rng::substream(seed, "stats.wild", b);
        double sum = 0.0, ss_star = 0.0;
        for (std::size_t g = 0; g < C; ++g) {
            const double wg = webb[rng.uniform_below(6)];
            const double wr_g = wg * r_g[g];
            sum += wr_g;
            ss_star += wr_g * wr_g;
        }
        const double se_star = std::sqrt(factor * ss_star) / n;
        const double t_star = (sum / n) / se_star; // (WR* - null)/se*
        if (side == Side::Greater ? t_star >= t_obs : t_star <= t_obs) ++extreme;
    }

    TestResult r;
    r.method = TestMethod::Wild;
    r.statistic = t_obs;
    r.p_value = static_cast<double>(1 + extreme) / static_cast<double>(B + 1);
    r.replicates = B;
    r.seed = seed;
    return r;
}

/// Exact cluster sign-flip permutation. S = sum_g r_g; every assignment
/// s in {-1,+1}^C is enumerated for C <= max_exact_clusters and
/// p = #{sum_g s_g r_g >= S} / 2^C (the identity assignment always counts).
/// Twice-residuals keep everything in integer arithmetic, so the count is
/// bit-exact. Larger C falls back to sampled assignments with the add-one
/// rule.
inline TestResult sign_flip_permutation(const ClusteredOutcomes& o, Side side = Side::Greater,
                                        std::size_t max_exact_clusters = 20,
                                        std::uint64_t sampled_B = 9999,
                                        std::uint64_t seed = 42) {
    o.validate();
    const std::size_t C = o.n_clusters();
    const auto r2 = o.residuals_x2();
    long long S2 = 0;
    for (long long v : r2) S2 += v;

    TestResult result;
    result.method = TestMethod::Permutation;
    result.statistic = static_cast<double>(S2) / 2.0;

    if (C <= max_exact_clusters) {
        const std::uint64_t total = 1ull << C;
        std::uint64_t hits = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            long long s = 0;
            for (std::size_t g = 0; g < C; ++g)
                s += (mask >> g) & 1ull ? r2[g] : -r2[g];
            if (side == Side::Greater ? s >= S2 : s <= S2) ++hits;
        }
        result.p_value = static_cast<double>(hits) / static_cast<double>(total);
        result.replicates = total;
        result.exact = true;
    } else {
        if (sampled_B < 1)
            throw Error(ErrorCode::ConfigurationError, "sampled permutation needs B >= 1");
        std::uint64_t hits = 0;
        for (std::uint64_t b = 0; b < sampled_B; ++b) {
            Rng rng = Rng::substream(seed, "stats.signflip", b);
            long long s = 0;
            for (std::size_t g = 0; g < C; ++g) s += rng.coin() ? r2[g] : -r2[g];
            if (side == Side::Greater ? s >= S2 : s <= S2) ++hits;
        }
        result.p_value =
            static_cast<double>(1 + hits) / static_cast<double>(sampled_B + 1);
        result.replicates = sampled_B;
        result.exact = false;
        result.seed = seed;
    }
    return result;
}

enum class FamilyMark { CorrectedPass, UncorrectedPass, Fail };

inline const char* family_mark_symbol(FamilyMark m) {
    switch (m) {
        case FamilyMark::CorrectedPass: return "★"; // filled star
        case FamilyMark::UncorrectedPass: return "•"; // bullet
        default: return "×"; // multiplication sign
    }
}

struct FamilyDecision {
    double p_value = 1.0;
    double corrected_alpha = 0.0;
    FamilyMark mark = FamilyMark::Fail;
};

/// Bonferroni ledger: a test passes corrected at p <= alpha/m, passes
/// uncorrected at p <= alpha, and fails otherwise.
inline std::vector<FamilyDecision> bonferroni_family(const std::vector<double>& p_values,
                                                     double family_alpha = 0.05) {
    if (p_values.empty())
        throw Error(ErrorCode::EmptyOutcomes, "Bonferroni family with no tests");
    if (!(family_alpha > 0.0 && family_alpha < 1.0))
        throw Error(ErrorCode::ConfigurationError, "family alpha must lie in (0,1)");
    const double corrected = family_alpha / static_cast<double>(p_values.size());
    std::vector<FamilyDecision> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        FamilyDecision d;
        d.p_value = p;
        d.corrected_alpha = corrected;
        if (p <= corrected) {
            d.mark = FamilyMark::CorrectedPass;
        } else if (p <= family_alpha) {
            d.mark = FamilyMark::UncorrectedPass;
        } else {
            d.mark = FamilyMark::Fail;
        }
        out.push_back(d);
    }
    return out;
}

} // namespace gadmec::stats
