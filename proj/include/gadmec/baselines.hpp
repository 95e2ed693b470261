#pragma once

// Deterministic baseline selectors sharing the candidate pool and budget:
// greedy budget-fill over query similarity, MMR, and an Okapi BM25 ranker.
// The BM25 index also feeds the hybrid lexical fitness term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "gadmec/corpus.hpp"
#include "gadmec/error.hpp"
#include "gadmec/fitness.hpp"
#include "gadmec/text.hpp"

namespace gadmec::baselines {

/// Okapi BM25 over lowercased alphanumeric tokens; no stemming, no
/// stopwords. idf(t) = ln((N - df + 0.5)/(df + 0.5) + 1), nonnegative for
/// df <= N.
class Bm25Index {
  public:
    Bm25Index(double k1 = 1.5, double b = 0.75) : k1_(k1), b_(b) {}

    static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs,
                           double k1 = 1.5, double b = 0.75) {
        if (docs.empty()) throw Error(ErrorCode::EmptyPool, "BM25 index over zero documents");
        Bm25Index idx(k1, b);
        long long total_len = 0;
        for (const auto& [id, text] : docs) {
            if (idx.doc_index_.count(id))
                throw Error(ErrorCode::DuplicateId, "document '" + id + "'");
            Doc d;
            auto toks = lexical_tokens(text);
            d.length = toks.size();
            total_len += static_cast<long long>(toks.size());
            for (const auto& t : toks) ++d.tf[t];
            for (const auto& [t, _] : d.tf) ++idx.df_[t];
            idx.doc_index_.emplace(id, idx.docs_.size());
            idx.docs_.push_back(std::move(d));
        }
        idx.avgdl_ = idx.docs_.empty()
                         ? 0.0
                         : static_cast<double>(total_len) / static_cast<double>(idx.docs_.size());
        return idx;
    }

    std::size_t doc_count() const { return docs_.size(); }
    double average_length() const { return avgdl_; }

    double score(const std::string& query_text, const std::string& doc_id) const {
        auto it = doc_index_.find(doc_id);
        if (it == doc_index_.end())
            throw Error(ErrorCode::UnknownId, "document '" + doc_id + "' not indexed");
        const Doc& d = docs_[it->second];
        const double N = static_cast<double>(docs_.size());
        const double avgdl = avgdl_ > 0.0 ? avgdl_ : 1.0;
        const double len_norm = k1_ * (1.0 - b_ + b_ * static_cast<double>(d.length) / avgdl);
        double s = 0.0;
        for (const auto& t : lexical_tokens(query_text)) {
            auto tf_it = d.tf.find(t);
            if (tf_it == d.tf.end()) continue;
            const double tf = static_cast<double>(tf_it->second);
            auto df_it = df_.find(t);
            const double df = df_it == df_.end() ? 0.0 : static_cast<double>(df_it->second);
            const double idf = std::log((N - df + 0.5) / (df + 0.5) + 1.0);
            s += idf * tf * (k1_ + 1.0) / (tf + len_norm);
        }
        return s;
    }

  private:
    struct Doc {
        std::unordered_map<std::string, long long> tf;
        std::size_t length = 0;
    };
    double k1_, b_;
    double avgdl_ = 0.0;
    std::vector<Doc> docs_;
    std::unordered_map<std::string, std::size_t> doc_index_;
    std::unordered_map<std::string, long long> df_;
};

inline Bm25Index build_pool_index(const corpus::CandidatePool& pool,
                                  const corpus::CorpusStore& store, double k1 = 1.5,
                                  double b = 0.75) {
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(pool.entries.size());
    for (const auto& e : pool.entries) docs.emplace_back(e.chunk_id, store.chunk(e.chunk_id).text);
    return Bm25Index::build(docs, k1, b);
}

/// Raw scores aligned with pool order, as consumed by the hybrid fitness.
inline std::vector<double> pool_scores(const Bm25Index& index, const std::string& query_text,
                                       const corpus::CandidatePool& pool) {
    std::vector<double> out;
    out.reserve(pool.entries.size());
    for (const auto& e : pool.entries) out.push_back(index.score(query_text, e.chunk_id));
    return out;
}

namespace detail {

inline fitness::EvidencePlan fill_in_order(const fitness::FitnessContext& ctx,
                                           const std::vector<std::size_t>& order,
                                           long long budget) {
    fitness::EvidencePlan plan;
    plan.question_id = ctx.question_id();
    long long total = 0;
    for (std::size_t pos : order) {
        if (total + ctx.token_count(pos) > budget) continue;
        plan.chunk_ids.push_back(ctx.chunk_id(pos));
        total += ctx.token_count(pos);
    }
    plan.total_tokens = total;
    return plan;
}

} // namespace detail

/// Budget-fill in descending query-similarity order; chunks that do not fit
/// are skipped, not terminal.
inline fitness::EvidencePlan greedy_select(const fitness::FitnessContext& ctx, long long budget) {
    const std::size_t n = ctx.pool_size();
    if (n == 0) throw Error(ErrorCode::EmptyPool, "greedy over an empty pool");
    if (budget <= 0) throw Error(ErrorCode::ConfigurationError, "budget must be positive");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ctx.query_similarity(a) != ctx.query_similarity(b))
            return ctx.query_similarity(a) > ctx.query_similarity(b);
        return ctx.chunk_id(a) < ctx.chunk_id(b);
    });
    return detail::fill_in_order(ctx, order, budget);
}

/// Maximal Marginal Relevance: repeatedly add the budget-fitting chunk
/// maximising lambda*cos(chunk, query) - (1-lambda)*max over selected of
/// cos(chunk, selected). The redundancy term is 0 while nothing is selected,
/// so the first pick is pure relevance. Ties go to the smaller chunk_id.
inline fitness::EvidencePlan mmr_select(const fitness::FitnessContext& ctx, long long budget,
                                        double lambda = 0.5) {
    const std::size_t n = ctx.pool_size();
    if (n == 0) throw Error(ErrorCode::EmptyPool, "MMR over an empty pool");
    if (budget <= 0) throw Error(ErrorCode::ConfigurationError, "budget must be positive");
    if (lambda < 0.0 || lambda > 1.0)
        throw Error(ErrorCode::ConfigurationError, "MMR lambda must lie in [0,1]");

    fitness::EvidencePlan plan;
    plan.question_id = ctx.question_id();
    std::vector<char> selected(n, 0);
    std::vector<std::size_t> picks;
    long long total = 0;

    for (;;) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (selected[i]) continue;
            if (total + ctx.token_count(i) > budget) continue;
            double redundancy = 0.0;
            if (!picks.empty()) {
                redundancy = ctx.pair_similarity(i, picks[0]);
                for (std::size_t s : picks)
                    redundancy = std::max(redundancy, ctx.pair_similarity(i, s));
            }
            const double score =
                lambda * ctx.query_similarity(i) - (1.0 - lambda) * redundancy;
            if (best == n || score > best_score ||
                (score == best_score && ctx.chunk_id(i) < ctx.chunk_id(best))) {
                best = i;
                best_score = score;
            }
        }
        if (best == n) break;
        selected[best] = 1;
        picks.push_back(best);
        plan.chunk_ids.push_back(ctx.chunk_id(best));
        total += ctx.token_count(best);
    }
    plan.total_tokens = total;
    return plan;
}

/// Budget-fill in descending BM25 order. A stable sort keeps pool order for
/// equal scores, so an all-zero scoring (out-of-vocabulary question)
/// degrades to the pool's semantic ranking.
inline fitness::EvidencePlan bm25_select(const fitness::FitnessContext& ctx,
                                         const Bm25Index& index, const std::string& query_text,
                                         long long budget) {
    const std::size_t n = ctx.pool_size();
    if (n == 0) throw Error(ErrorCode::EmptyPool, "BM25 over an empty pool");
    if (budget <= 0) throw Error(ErrorCode::ConfigurationError, "budget must be positive");
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = index.score(query_text, ctx.chunk_id(i));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return detail::fill_in_order(ctx, order, budget);
}

} // namespace gadmec::baselines
