#pragma once

// Mechanism checks behind the headline win rates: budget-fill statistics,
// length-matched bins and bin-width sweeps, content-distance quartile
// slices, per-combination win rates, joint outcome matrices, and TOP/NICHO
// regime stratification. Pure aggregation; bootstrap CIs are the only
// seeded computation.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gadmec/corpus.hpp"
#include "gadmec/error.hpp"
#include "gadmec/judging.hpp"
#include "gadmec/stats.hpp"
#include "gadmec/text.hpp"

namespace gadmec::diag {

/// Per-pair covariates joined from the two answers; lengths are UTF-8 code
/// points of the focal (x) and baseline (y) answers.
struct PairFeature {
    std::string pair_id;
    std::string question_id;
    std::string combination_id;
    corpus::Regime regime = corpus::Regime::UNSPECIFIED;
    std::size_t len_x = 0;
    std::size_t len_y = 0;
    std::size_t char_diff = 0;
    double jaccard = 0.0;
    std::optional<double> cosine;
};

/// A feature row plus the focal outcome: 1 focal win, 0 focal loss, empty
/// for a tie. Flagged skips never become JoinedPairs.
struct JoinedPair {
    PairFeature feature;
    std::optional<int> outcome;
};

/// Intersection-over-union of lexical token sets; identical (even empty)
/// content counts as similarity 1.
inline double jaccard_similarity(const std::string& a, const std::string& b) {
    auto sa = lexical_token_set(a);
    auto sb = lexical_token_set(b);
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Join verdicts with the two answers per pair. `focal_method` must be one
/// of the two methods in every verdict; answer embeddings are optional and
/// enable the cosine metric when provided for both answers of a pair.
inline std::vector<JoinedPair> joined_pairs(
    const std::vector<judging::VerdictRecord>& verdicts,
    const std::vector<judging::AnswerRecord>& answers,
    const std::vector<corpus::Question>& questions, const std::string& focal_method,
    const std::unordered_map<std::string, EmbeddingVector>* answer_embeddings = nullptr) {
    std::unordered_map<std::string, const judging::AnswerRecord*> by_key;
    for (const auto& a : answers) by_key[a.method + "|" + a.question_id] = &a;
    std::unordered_map<std::string, const corpus::Question*> by_qid;
    for (const auto& q : questions) by_qid[q.question_id] = &q;

    std::vector<JoinedPair> out;
    out.reserve(verdicts.size());
    for (const auto& v : verdicts) {
        if (v.flagged_skip) continue;
        const std::string other = v.method_a_slot == focal_method ? v.method_b_slot
                                                                  : v.method_a_slot;
        if (v.method_a_slot != focal_method && v.method_b_slot != focal_method)
            throw Error(ErrorCode::UnknownId,
                        "focal method '" + focal_method + "' absent from pair " + v.pair_id);
        auto fx = by_key.find(focal_method + "|" + v.question_id);
        auto fy = by_key.find(other + "|" + v.question_id);
        if (fx == by_key.end() || fy == by_key.end())
            throw Error(ErrorCode::UnknownId, "answers missing for pair " + v.pair_id);

        JoinedPair jp;
        jp.feature.pair_id = v.pair_id;
        jp.feature.question_id = v.question_id;
        jp.feature.combination_id = v.combination_id;
        auto qit = by_qid.find(v.question_id);
        if (qit != by_qid.end()) jp.feature.regime = qit->second->regime;
        jp.feature.len_x = utf8_length(fx->second->answer_text);
        jp.feature.len_y = utf8_length(fy->second->answer_text);
        jp.feature.char_diff = jp.feature.len_x > jp.feature.len_y
                                   ? jp.feature.len_x - jp.feature.len_y
                                   : jp.feature.len_y - jp.feature.len_x;
        jp.feature.jaccard =
            jaccard_similarity(fx->second->answer_text, fy->second->answer_text);
        if (answer_embeddings) {
            auto ex = answer_embeddings->find(focal_method + "|" + v.question_id);
            auto ey = answer_embeddings->find(other + "|" + v.question_id);
            if (ex != answer_embeddings->end() && ey != answer_embeddings->end())
                jp.feature.cosine = cosine_similarity(ex->second, ey->second);
        }
        if (!v.winner_method.empty()) jp.outcome = v.winner_method == focal_method ? 1 : 0;
        out.push_back(std::move(jp));
    }
    return out;
}

// ---- budget fill -----------------------------------------------------------

struct FillStats {
    std::size_t count = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

inline FillStats fill_stats(std::vector<long long> totals) {
    if (totals.empty()) throw Error(ErrorCode::EmptyOutcomes, "no plans for selector");
    std::sort(totals.begin(), totals.end());
    std::vector<double> v(totals.begin(), totals.end());
    FillStats s;
    s.count = v.size();
    s.median = stats::detail::quantile_sorted(v, 0.5);
    s.q1 = stats::detail::quantile_sorted(v, 0.25);
    s.q3 = stats::detail::quantile_sorted(v, 0.75);
    return s;
}

inline std::map<std::string, FillStats> budget_fill_stats(
    const std::map<std::string, std::vector<long long>>& totals_by_selector) {
    std::map<std::string, FillStats> out;
    for (const auto& [selector, totals] : totals_by_selector) out[selector] = fill_stats(totals);
    return out;
}

// ---- length matching -------------------------------------------------------

inline std::pair<std::vector<PairFeature>, std::vector<PairFeature>>
length_matched_subsets(const std::vector<PairFeature>& features, std::size_t bin_width_chars) {
    if (features.empty()) throw Error(ErrorCode::EmptyOutcomes, "no pair features");
    std::pair<std::vector<PairFeature>, std::vector<PairFeature>> out;
    for (const auto& f : features)
        (f.char_diff <= bin_width_chars ? out.first : out.second).push_back(f);
    return out;
}

struct WinRateBlock {
    std::size_t n_pairs = 0;
    std::size_t n_ties = 0;
    std::size_t n_effective = 0;
    std::size_t n_clusters = 0;
    std::optional<double> win_rate;
    bool ci_available = false;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

namespace detail {

inline WinRateBlock win_rate_block(const std::vector<const JoinedPair*>& pairs, std::uint64_t B,
                                   std::uint64_t seed) {
    WinRateBlock w;
    w.n_pairs = pairs.size();
    std::vector<std::pair<std::string, int>> labeled;
    for (const JoinedPair* p : pairs) {
        if (!p->outcome) {
            ++w.n_ties;
            continue;
        }
        labeled.emplace_back(p->feature.combination_id, *p->outcome);
    }
    w.n_effective = labeled.size();
    if (labeled.empty()) return w;
    auto outcomes = stats::ClusteredOutcomes::from_pairs(labeled);
    w.n_clusters = outcomes.n_clusters();
    w.win_rate = stats::win_rate(outcomes);
    if (outcomes.n_clusters() >= 2 && B > 0) {
        auto r = stats::cluster_bootstrap(outcomes, B, stats::Side::Greater, seed);
        w.ci_available = true;
        w.ci_low = r.ci_low;
        w.ci_high = r.ci_high;
    }
    return w;
}

} // namespace detail

// ---- bin-width sweep -------------------------------------------------------

struct BinRow {
    std::optional<std::size_t> width; // empty means "all pairs"
    WinRateBlock block;
};

inline std::vector<std::optional<std::size_t>> default_bin_widths() {
    return {std::size_t{50}, std::size_t{100}, std::size_t{150}, std::size_t{200},
            std::size_t{300}, std::size_t{400}, std::nullopt};
}

/// Win rate recomputed inside every length-matched bin. The unbounded row
/// applies no filter at all, so it reproduces the unconditional win rate
/// exactly. Bins with no effective pairs carry an empty win_rate.
inline std::vector<BinRow> bin_sensitivity_sweep(
    const std::vector<JoinedPair>& joined,
    const std::vector<std::optional<std::size_t>>& widths = default_bin_widths(),
    std::uint64_t B = 10000, std::uint64_t seed = 42) {
    if (joined.empty()) throw Error(ErrorCode::EmptyOutcomes, "no joined pairs");
    std::vector<BinRow> rows;
    rows.reserve(widths.size());
    for (const auto& width : widths) {
        std::vector<const JoinedPair*> in_bin;
        for (const auto& jp : joined) {
            if (!width || jp.feature.char_diff <= *width) in_bin.push_back(&jp);
        }
        BinRow row;
        row.width = width;
        row.block = detail::win_rate_block(in_bin, B, seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- content-distance slices -----------------------------------------------

enum class DistanceMetric { Jaccard, Cosine };

struct SliceRow {
    std::size_t index = 0; // 0 = most distinct (lowest similarity)
    WinRateBlock block;
};

struct SliceTable {
    DistanceMetric metric = DistanceMetric::Jaccard;
    std::vector<double> boundaries; // n_slices - 1 quantile cut points
    std::vector<SliceRow> rows;
    std::size_t analyzed = 0;
    bool degenerate_metric = false;
};

/// Quartile (or n-slice) split over the empirical metric distribution of
/// the analyzed subset. Values equal to a boundary fall into the
/// lower-index slice. Slice 0 holds the most lexically distinct pairs.
inline SliceTable content_distance_slices(const std::vector<JoinedPair>& joined,
                                          DistanceMetric metric, std::size_t n_slices = 4,
                                          std::uint64_t B = 10000, std::uint64_t seed = 42) {
    if (n_slices < 2) throw Error(ErrorCode::ConfigurationError, "need at least 2 slices");
    std::vector<const JoinedPair*> with_metric;
    std::vector<double> values;
    for (const auto& jp : joined) {
        if (metric == DistanceMetric::Cosine) {
            if (!jp.feature.cosine) continue;
            with_metric.push_back(&jp);
            values.push_back(*jp.feature.cosine);
        } else {
            with_metric.push_back(&jp);
            values.push_back(jp.feature.jaccard);
        }
    }
    if (with_metric.size() < n_slices)
        throw Error(ErrorCode::ValidationError,
                    "fewer pairs (" + std::to_string(with_metric.size()) + ") than slices");

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    SliceTable table;
    table.metric = metric;
    table.analyzed = with_metric.size();
    table.degenerate_metric = sorted.front() == sorted.back();
    for (std::size_t s = 1; s < n_slices; ++s)
        table.boundaries.push_back(stats::detail::quantile_sorted(
            sorted, static_cast<double>(s) / static_cast<double>(n_slices)));

    std::vector<std::vector<const JoinedPair*>> buckets(n_slices);
    for (std::size_t i = 0; i < with_metric.size(); ++i) {
        std::size_t slice = n_slices - 1;
        for (std::size_t s = 0; s < table.boundaries.size(); ++s) {
            if (values[i] <= table.boundaries[s]) {
                slice = s;
                break;
            }
        }
        buckets[slice].push_back(with_metric[i]);
    }
    for (std::size_t s = 0; s < n_slices; ++s) {
        SliceRow row;
        row.index = s;
        row.block = detail::win_rate_block(buckets[s], B, seed);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---- per-combination win rates ----------------------------------------------

struct CombinationRow {
    std::string combination_id;
    corpus::Regime regime = corpus::Regime::UNSPECIFIED;
    std::size_t n_pairs = 0;
    std::size_t n_ties = 0;
    long long wins = 0;
    std::optional<double> win_rate;
};

inline std::vector<CombinationRow> per_combination_winrates(
    const std::vector<JoinedPair>& joined) {
    std::map<std::string, CombinationRow> rows;
    for (const auto& jp : joined) {
        auto& row = rows[jp.feature.combination_id];
        if (row.n_pairs == 0) {
            row.combination_id = jp.feature.combination_id;
            row.regime = jp.feature.regime;
        }
        ++row.n_pairs;
        if (!jp.outcome) {
            ++row.n_ties;
        } else {
            row.wins += *jp.outcome;
        }
    }
    std::vector<CombinationRow> out;
    out.reserve(rows.size());
    for (auto& [_, row] : rows) {
        const std::size_t eff = row.n_pairs - row.n_ties;
        if (eff > 0)
            row.win_rate = static_cast<double>(row.wins) / static_cast<double>(eff);
        out.push_back(std::move(row));
    }
    return out;
}

// ---- joint outcome matrix ----------------------------------------------------

/// 3x3 counts over {focal win, focal loss, tie} x {focal win, focal loss,
/// tie} for the same focal method against two baselines, joined on
/// question_id.
struct JointMatrix {
    std::array<std::array<long long, 3>, 3> counts{}; // [vs_base1][vs_base2]
    std::size_t shared = 0;
};

inline JointMatrix joint_outcome_matrix(const std::vector<JoinedPair>& vs_base1,
                                        const std::vector<JoinedPair>& vs_base2) {
    auto category = [](const JoinedPair& jp) -> std::size_t {
        if (!jp.outcome) return 2;
        return *jp.outcome == 1 ? 0 : 1;
    };
    std::unordered_map<std::string, std::size_t> second;
    for (const auto& jp : vs_base2) second[jp.feature.question_id] = category(jp);

    JointMatrix m;
    for (const auto& jp : vs_base1) {
        auto it = second.find(jp.feature.question_id);
        if (it == second.end()) continue;
        ++m.counts[category(jp)][it->second];
        ++m.shared;
    }
    if (m.shared == 0)
        throw Error(ErrorCode::EmptyOutcomes, "the two comparisons share no questions");
    return m;
}

// ---- regime stratification ----------------------------------------------------

struct RegimeRow {
    corpus::Regime regime = corpus::Regime::UNSPECIFIED;
    WinRateBlock block;
};

/// One row per corpus regime (TOP, NICHO), each analyzed like a pooled
/// comparison; strata with fewer than two clusters get no CI, empty strata
/// report zero pairs.
inline std::vector<RegimeRow> regime_stratification(const std::vector<JoinedPair>& joined,
                                                    std::uint64_t B = 10000,
                                                    std::uint64_t seed = 42) {
    std::vector<RegimeRow> rows;
    for (corpus::Regime regime : {corpus::Regime::TOP, corpus::Regime::NICHO}) {
        std::vector<const JoinedPair*> stratum;
        for (const auto& jp : joined)
            if (jp.feature.regime == regime) stratum.push_back(&jp);
        RegimeRow row;
        row.regime = regime;
        row.block = detail::win_rate_block(stratum, B, seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace gadmec::diag
