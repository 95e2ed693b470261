#pragma once

// Surrogate fitness over candidate evidence plans:
//   f(P) = alpha*coverage + beta*diversity + gamma*cost + delta*coherence
//        + epsilon*subaspect_coverage + zeta*lexical
// Components with a zero weight are never evaluated, so disabled terms can
// not raise errors or cost time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gadmec/corpus.hpp"
#include "gadmec/embedding.hpp"
#include "gadmec/error.hpp"
#include "gadmec/rng.hpp"

namespace gadmec::fitness {

struct FitnessWeights {
    double alpha = 0.30;
    double beta = 0.15;
    double gamma = 0.00;
    double delta = 0.15;
    double epsilon = 0.40;
    double zeta = 0.0;
    double subaspect_threshold = 0.40;

    void validate() const {
        for (double w : {alpha, beta, gamma, delta, epsilon, zeta, subaspect_threshold}) {
            if (!std::isfinite(w))
                throw Error(ErrorCode::ConfigurationError, "non-finite fitness weight");
        }
        if (subaspect_threshold < 0.0 || subaspect_threshold > 1.0)
            throw Error(ErrorCode::ConfigurationError,
                        "subaspect_threshold must lie in [0,1]");
    }
};

/// A feasible chunk subset in acceptance order. total_tokens is maintained by
/// whoever builds the plan; selectors guarantee total_tokens <= budget.
struct EvidencePlan {
    std::string question_id;
    std::vector<std::string> chunk_ids;
    long long total_tokens = 0;
    bool theme_constraint_met = true;

    bool empty() const { return chunk_ids.empty(); }
    std::size_t size() const { return chunk_ids.size(); }
};

/// Read-only per-question evaluation context. All pairwise and per-aspect
/// similarities are precomputed at construction, so component evaluation is
/// table lookups only and safe to run concurrently.
class FitnessContext {
  public:
    FitnessContext(const corpus::CandidatePool& pool, const corpus::CorpusStore& store,
                   EmbeddingVector query_embedding,
                   std::vector<EmbeddingVector> subaspect_embeddings, long long budget_tokens)
        : question_id_(pool.question_id),
          query_(std::move(query_embedding)),
          subaspects_(std::move(subaspect_embeddings)),
          budget_(budget_tokens) {
        if (budget_ <= 0)
            throw Error(ErrorCode::ConfigurationError, "budget must be positive");
        const std::size_t n = pool.entries.size();
        chunk_ids_.reserve(n);
        query_sims_.reserve(n);
        token_counts_.reserve(n);
        embeddings_.reserve(n);
        for (const auto& e : pool.entries) {
            const corpus::Chunk& c = store.chunk(e.chunk_id);
            if (!position_.emplace(e.chunk_id, chunk_ids_.size()).second)
                throw Error(ErrorCode::DuplicateId, "pool chunk '" + e.chunk_id + "'");
            chunk_ids_.push_back(e.chunk_id);
            query_sims_.push_back(e.query_similarity);
            token_counts_.push_back(c.token_count);
            embeddings_.push_back(store.embedding(e.chunk_id));
        }
        pair_sims_.assign(n * n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double s = cosine_similarity(embeddings_[i], embeddings_[j]);
                pair_sims_[i * n + j] = s;
                pair_sims_[j * n + i] = s;
            }
        }
        subaspect_sims_.resize(subaspects_.size());
        for (std::size_t a = 0; a < subaspects_.size(); ++a) {
            subaspect_sims_[a].reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                subaspect_sims_[a].push_back(cosine_similarity(embeddings_[i], subaspects_[a]));
        }
    }

    const std::string& question_id() const { return question_id_; }
    std::size_t pool_size() const { return chunk_ids_.size(); }
    long long budget() const { return budget_; }
    const EmbeddingVector& query() const { return query_; }
    std::size_t subaspect_count() const { return subaspects_.size(); }

    const std::string& chunk_id(std::size_t pos) const { return chunk_ids_[pos]; }
    const EmbeddingVector& embedding(std::size_t pos) const { return embeddings_[pos]; }
    long long token_count(std::size_t pos) const { return token_counts_[pos]; }
    double query_similarity(std::size_t pos) const { return query_sims_[pos]; }

    double pair_similarity(std::size_t i, std::size_t j) const {
        return pair_sims_[i * pool_size() + j];
    }
    double subaspect_similarity(std::size_t aspect, std::size_t pos) const {
        return subaspect_sims_[aspect][pos];
    }

    std::size_t position(const std::string& chunk_id) const {
        auto it = position_.find(chunk_id);
        if (it == position_.end())
            throw Error(ErrorCode::UnknownId, "chunk '" + chunk_id + "' not in pool");
        return it->second;
    }

    /// Raw BM25 scores of the pool chunks against the question, aligned by
    /// pool position. Installed by the pipeline when a hybrid preset is live.
    void set_bm25_scores(std::vector<double> scores) {
        if (scores.size() != pool_size())
            throw Error(ErrorCode::DimensionMismatch, "BM25 score count != pool size");
        bm25_min_ = bm25_max_ = scores.empty() ? 0.0 : scores[0];
        for (double s : scores) {
            bm25_min_ = std::min(bm25_min_, s);
            bm25_max_ = std::max(bm25_max_, s);
        }
        bm25_scores_ = std::move(scores);
    }
    bool has_bm25_scores() const { return bm25_scores_.has_value(); }
    double bm25_raw(std::size_t pos) const { return (*bm25_scores_)[pos]; }

    /// Min-max over the pool; a constant score column maps to 0.
    double bm25_normalised(std::size_t pos) const {
        if (bm25_max_ == bm25_min_) return 0.0;
        return ((*bm25_scores_)[pos] - bm25_min_) / (bm25_max_ - bm25_min_);
    }

    /// Thematic cluster labels over pool positions, filled once per question
    /// by the decoder's preparation step.
    void set_theme_labels(std::vector<int> labels) {
        if (labels.size() != pool_size())
            throw Error(ErrorCode::DimensionMismatch, "label count != pool size");
        theme_labels_ = std::move(labels);
    }
    bool has_theme_labels() const { return theme_labels_.has_value(); }
    const std::vector<int>& theme_labels() const {
        if (!theme_labels_)
            throw Error(ErrorCode::ConfigurationError, "theme labels not prepared");
        return *theme_labels_;
    }

  private:
    std::string question_id_;
    EmbeddingVector query_;
    std::vector<EmbeddingVector> subaspects_;
    long long budget_;
    std::vector<std::string> chunk_ids_;
    std::vector<double> query_sims_;
    std::vector<long long> token_counts_;
    std::vector<EmbeddingVector> embeddings_;
    std::vector<double> pair_sims_;
    std::vector<std::vector<double>> subaspect_sims_;
    std::unordered_map<std::string, std::size_t> position_;
    std::optional<std::vector<double>> bm25_scores_;
    double bm25_min_ = 0.0, bm25_max_ = 0.0;
    std::optional<std::vector<int>> theme_labels_;
};

inline FitnessContext make_context(const corpus::CandidatePool& pool,
                                   const corpus::CorpusStore& store, const corpus::Question& q,
                                   long long budget_tokens) {
    return FitnessContext(pool, store, q.query_embedding, q.subaspect_embeddings, budget_tokens);
}

namespace detail {

inline std::vector<std::size_t> resolve(const EvidencePlan& plan, const FitnessContext& ctx) {
    std::vector<std::size_t> pos;
    pos.reserve(plan.chunk_ids.size());
    std::unordered_set<std::string> seen;
    for (const auto& id : plan.chunk_ids) {
        if (!seen.insert(id).second)
            throw Error(ErrorCode::DuplicateId, "plan repeats chunk '" + id + "'");
        pos.push_back(ctx.position(id));
    }
    return pos;
}

} // namespace detail

/// Mean query similarity of the selected chunks.
inline double coverage(const EvidencePlan& plan, const FitnessContext& ctx) {
    if (plan.empty())
        throw Error(ErrorCode::ComponentUndefined, "coverage of an empty plan");
    auto pos = detail::resolve(plan, ctx);
    double s = 0.0;
    for (std::size_t p : pos) s += ctx.query_similarity(p);
    return s / static_cast<double>(pos.size());
}

/// Mean pairwise dissimilarity, 0 for plans with fewer than two chunks.
inline double diversity(const EvidencePlan& plan, const FitnessContext& ctx) {
    auto pos = detail::resolve(plan, ctx);
    if (pos.size() < 2) return 0.0;
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        for (std::size_t j = i + 1; j < pos.size(); ++j) {
            s += 1.0 - ctx.pair_similarity(pos[i], pos[j]);
            ++pairs;
        }
    }
    return s / static_cast<double>(pairs);
}

/// Token penalty, -(total/budget); in [-1, 0] for feasible plans.
inline double cost(const EvidencePlan& plan, const FitnessContext& ctx) {
    return -(static_cast<double>(plan.total_tokens) / static_cast<double>(ctx.budget()));
}

/// Cosine between the centroid of the selected embeddings and the query.
inline double coherence(const EvidencePlan& plan, const FitnessContext& ctx) {
    if (plan.empty())
        throw Error(ErrorCode::ComponentUndefined, "coherence of an empty plan");
    auto pos = detail::resolve(plan, ctx);
    std::vector<const EmbeddingVector*> members;
    members.reserve(pos.size());
    for (std::size_t p : pos) members.push_back(&ctx.embedding(p));
    return cosine_centroid_query(mean_vector(members), ctx.query());
}

/// Fraction of sub-aspects whose best match in the plan clears the
/// threshold; 1.0 when the question has no sub-aspect decomposition.
inline double subaspect_coverage(const EvidencePlan& plan, const FitnessContext& ctx,
                                 double threshold) {
    if (ctx.subaspect_count() == 0) return 1.0;
    auto pos = detail::resolve(plan, ctx);
    std::size_t covered = 0;
    for (std::size_t a = 0; a < ctx.subaspect_count(); ++a) {
        double best = -1.0;
        for (std::size_t p : pos) best = std::max(best, ctx.subaspect_similarity(a, p));
        if (best >= threshold) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(ctx.subaspect_count());
}

/// Mean of min-max normalised BM25 scores of the selected chunks.
inline double lexical_component(const EvidencePlan& plan, const FitnessContext& ctx) {
    if (!ctx.has_bm25_scores())
        throw Error(ErrorCode::ConfigurationError,
                    "lexical weight is active but no BM25 scores were installed");
    if (plan.empty())
        throw Error(ErrorCode::ComponentUndefined, "lexical component of an empty plan");
    auto pos = detail::resolve(plan, ctx);
    double s = 0.0;
    for (std::size_t p : pos) s += ctx.bm25_normalised(p);
    return s / static_cast<double>(pos.size());
}

inline double fitness(const EvidencePlan& plan, const FitnessContext& ctx,
                      const FitnessWeights& w) {
    w.validate();
    double f = 0.0;
    if (w.alpha != 0.0) f += w.alpha * coverage(plan, ctx);
    if (w.beta != 0.0) f += w.beta * diversity(plan, ctx);
    if (w.gamma != 0.0) f += w.gamma * cost(plan, ctx);
    if (w.delta != 0.0) f += w.delta * coherence(plan, ctx);
    if (w.epsilon != 0.0) f += w.epsilon * subaspect_coverage(plan, ctx, w.subaspect_threshold);
    if (w.zeta != 0.0) f += w.zeta * lexical_component(plan, ctx);
    return f;
}

/// Per-component values for run logs. Zero-weight components are reported as
/// 0 without being evaluated, mirroring fitness().
struct FitnessBreakdown {
    double cov = 0.0, div = 0.0, cost = 0.0, coh = 0.0, sub = 0.0, lex = 0.0;
    double total = 0.0;
};

inline FitnessBreakdown breakdown(const EvidencePlan& plan, const FitnessContext& ctx,
                                  const FitnessWeights& w) {
    w.validate();
    FitnessBreakdown b;
    if (w.alpha != 0.0) b.cov = coverage(plan, ctx);
    if (w.beta != 0.0) b.div = diversity(plan, ctx);
    if (w.gamma != 0.0) b.cost = cost(plan, ctx);
    if (w.delta != 0.0) b.coh = coherence(plan, ctx);
    if (w.epsilon != 0.0) b.sub = subaspect_coverage(plan, ctx, w.subaspect_threshold);
    if (w.zeta != 0.0) b.lex = lexical_component(plan, ctx);
    b.total = w.alpha * b.cov + w.beta * b.div + w.gamma * b.cost + w.delta * b.coh +
              w.epsilon * b.sub + w.zeta * b.lex;
    return b;
}

/// Uniform [0,1] draw keyed to the plan's chunk set and a stream seed.
/// Order of chunk_ids does not matter; re-evaluating the same plan in the
/// same run always returns the same value.
inline double random_fitness(const EvidencePlan& plan, std::uint64_t stream_seed) {
    std::vector<std::string> ids = plan.chunk_ids;
    std::sort(ids.begin(), ids.end());
    std::string buf;
    for (const auto& id : ids) {
        std::uint64_t len = id.size();
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
        buf += id;
    }
    std::uint64_t h = fnv1a64(buf);
    return u64_to_unit_double(mix64(mix64(stream_seed) ^ h));
}

} // namespace gadmec::fitness
