#pragma once

// Inter-judge agreement over shared pairwise verdicts: raw agreement,
// Cohen's kappa, and Gwet's AC1. The native category space is ternary
// {method X wins, method Y wins, tie}; a binary mode drops every pair in
// which either judge recorded a tie.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gadmec/error.hpp"

namespace gadmec::agreement {

enum class Category { MethodXWins = 0, MethodYWins = 1, Tie = 2 };

struct PairedVerdicts {
    std::vector<std::string> pair_ids;
    std::vector<Category> judge1;
    std::vector<Category> judge2;

    std::size_t n_shared() const { return judge1.size(); }

    void validate() const {
        if (judge1.size() != judge2.size() ||
            (!pair_ids.empty() && pair_ids.size() != judge1.size()))
            throw Error(ErrorCode::ValidationError, "verdict lists are not aligned");
    }

    /// Pairs where neither judge recorded a tie; the two-category view.
    PairedVerdicts without_ties() const {
        validate();
        PairedVerdicts out;
        for (std::size_t i = 0; i < judge1.size(); ++i) {
            if (judge1[i] == Category::Tie || judge2[i] == Category::Tie) continue;
            if (!pair_ids.empty()) out.pair_ids.push_back(pair_ids[i]);
            out.judge1.push_back(judge1[i]);
            out.judge2.push_back(judge2[i]);
        }
        return out;
    }
};

namespace detail {

struct Marginals {
    std::array<double, 3> judge1{};
    std::array<double, 3> judge2{};
    double p_a = 0.0;
};

inline Marginals tabulate(const PairedVerdicts& pv) {
    Marginals m;
    const double n = static_cast<double>(pv.n_shared());
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pv.n_shared(); ++i) {
        m.judge1[static_cast<std::size_t>(pv.judge1[i])] += 1.0;
        m.judge2[static_cast<std::size_t>(pv.judge2[i])] += 1.0;
        if (pv.judge1[i] == pv.judge2[i]) ++agree;
    }
    for (double& v : m.judge1) v /= n;
    for (double& v : m.judge2) v /= n;
    m.p_a = static_cast<double>(agree) / n;
    return m;
}

inline void check_degenerate(const Marginals& m) {
    for (std::size_t c = 0; c < 3; ++c) {
        if (m.judge1[c] == 1.0 && m.judge2[c] == 1.0)
            throw Error(ErrorCode::DegenerateAgreement,
                        "both judges constant on the same category");
    }
}

} // namespace detail

inline double raw_agreement(const PairedVerdicts& pv) {
    pv.validate();
    if (pv.n_shared() < 1) throw Error(ErrorCode::EmptyOutcomes, "no shared verdicts");
    return detail::tabulate(pv).p_a;
}

/// kappa = (p_a - p_e)/(1 - p_e), p_e = sum_c marginal1(c)*marginal2(c).
/// binary_mode restricts to pairs without ties and a 2-category space.
inline double cohens_kappa(const PairedVerdicts& pv, bool binary_mode = false) {
    PairedVerdicts data = binary_mode ? pv.without_ties() : pv;
    data.validate();
    if (data.n_shared() < 2)
        throw Error(ErrorCode::EmptyOutcomes, "kappa needs at least 2 shared verdicts");
    auto m = detail::tabulate(data);
    detail::check_degenerate(m);
    double p_e = 0.0;
    for (std::size_t c = 0; c < 3; ++c) p_e += m.judge1[c] * m.judge2[c];
    if (p_e == 1.0)
        throw Error(ErrorCode::DegenerateAgreement, "chance agreement is 1; kappa undefined");
    return (m.p_a - p_e) / (1.0 - p_e);
}

/// AC1 = (p_a - p_e)/(1 - p_e) with p_e = [1/(K-1)] * sum_c pi_c(1 - pi_c),
/// pi_c the mean of the two judges' marginals and K the declared category
/// space size (3, or 2 in binary mode) rather than the observed count.
inline double gwet_ac1(const PairedVerdicts& pv, bool binary_mode = false) {
    PairedVerdicts data = binary_mode ? pv.without_ties() : pv;
    data.validate();
    if (data.n_shared() < 2)
        throw Error(ErrorCode::EmptyOutcomes, "AC1 needs at least 2 shared verdicts");
    auto m = detail::tabulate(data);
    detail::check_degenerate(m);
    const double K = binary_mode ? 2.0 : 3.0;
    double p_e = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const double pi = (m.judge1[c] + m.judge2[c]) / 2.0;
        p_e += pi * (1.0 - pi);
    }
    p_e /= K - 1.0;
    if (p_e == 1.0)
        throw Error(ErrorCode::DegenerateAgreement, "chance agreement is 1; AC1 undefined");
    return (m.p_a - p_e) / (1.0 - p_e);
}

} // namespace gadmec::agreement
