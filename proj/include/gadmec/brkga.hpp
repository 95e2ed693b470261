#pragma once

// Biased random-key genetic algorithm over candidate pools. A chromosome is
// one key per pool chunk; the decoder turns keys into a feasible plan and is
// the only place constraints are enforced. All randomness flows from the
// config seed through named substreams, so runs are bit-reproducible and
// independent of evaluation scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gadmec/corpus.hpp"
#include "gadmec/error.hpp"
#include "gadmec/fitness.hpp"
#include "gadmec/kmeans.hpp"
#include "gadmec/rng.hpp"

namespace gadmec::brkga {

struct Chromosome {
    std::vector<double> keys; // each in [0,1], one per pool chunk
};

struct BrkgaConfig {
    std::size_t population_size = 20;
    double elite_fraction = 0.24;
    double elite_inherit_prob = 0.70;
    std::size_t max_generations = 50;
    std::size_t stagnation_limit = 15;
    std::uint64_t seed = 42;
    long long budget_tokens = 2000;
    double min_query_similarity = 0.15;
    double redundancy_threshold = 0.80;
    std::size_t min_theme_clusters = 3;
    std::size_t kmeans_k = 5;
    bool constraints_enabled = true;
    bool use_random_fitness = false;

    void validate() const {
        if (population_size < 2)
            throw Error(ErrorCode::ConfigurationError, "population_size must be >= 2");
        if (!(elite_fraction > 0.0 && elite_fraction < 1.0))
            throw Error(ErrorCode::ConfigurationError, "elite_fraction must lie in (0,1)");
        if (elite_inherit_prob < 0.0 || elite_inherit_prob > 1.0)
            throw Error(ErrorCode::ConfigurationError, "elite_inherit_prob must lie in [0,1]");
        if (max_generations < 1)
            throw Error(ErrorCode::ConfigurationError, "max_generations must be >= 1");
        if (budget_tokens <= 0)
            throw Error(ErrorCode::ConfigurationError, "budget_tokens must be positive");
        if (kmeans_k < 1) throw Error(ErrorCode::ConfigurationError, "kmeans_k must be >= 1");
    }

    std::size_t elite_count() const {
        auto e = static_cast<std::size_t>(
            std::ceil(elite_fraction * static_cast<double>(population_size)));
        if (e < 1) e = 1;
        if (e > population_size - 1) e = population_size - 1;
        return e;
    }
};

struct GenerationStats {
    std::size_t generation = 0; // 1-based; the initial population is generation 1
    double best_fitness = 0.0;  // best seen so far (monotone under elitism)
    double mean_fitness = 0.0;
    std::size_t stagnation = 0;
    double mean_plan_chunks = 0.0;
    double mean_plan_tokens = 0.0;
    std::size_t theme_violations = 0;
};

struct EvolutionTrace {
    std::vector<GenerationStats> generations;
    std::size_t fitness_evaluations = 0;
    std::size_t best_generation = 1;
    bool stopped_by_stagnation = false;
};

/// Theme labels for a pool: k-means over the pool embeddings with
/// k = min(kmeans_k, pool size), seeded from the run seed only.
inline KmeansResult compute_theme_labels(const fitness::FitnessContext& ctx,
                                         const BrkgaConfig& cfg) {
    std::vector<EmbeddingVector> points;
    points.reserve(ctx.pool_size());
    for (std::size_t i = 0; i < ctx.pool_size(); ++i) points.push_back(ctx.embedding(i));
    return kmeans(points, std::min(cfg.kmeans_k, ctx.pool_size()), cfg.seed);
}

inline void prepare_theme_labels(fitness::FitnessContext& ctx, const BrkgaConfig& cfg) {
    if (!ctx.has_theme_labels()) ctx.set_theme_labels(compute_theme_labels(ctx, cfg).labels);
}

/// Keys to plan. Chunks are visited in ascending key order (ties by
/// chunk_id); each is accepted iff its query similarity clears the floor,
/// its maximum cosine to the already-accepted set stays at or below the
/// redundancy ceiling, and it fits the remaining budget. Rejected chunks are
/// skipped, not terminal. With constraints disabled only the budget applies.
/// After the pass, plans spanning fewer than min_theme_clusters thematic
/// labels are repaired by swapping the largest-key member for the
/// smallest-key feasible outsider from an uncovered cluster; if repair fails
/// within pool-size attempts the plan is returned with
/// theme_constraint_met=false.
inline fitness::EvidencePlan decode(const Chromosome& c, const fitness::FitnessContext& ctx,
                                    const BrkgaConfig& cfg) {
    const std::size_t n = ctx.pool_size();
    if (n == 0) throw Error(ErrorCode::EmptyPool, "decode over an empty pool");
    if (c.keys.size() != n)
        throw Error(ErrorCode::DimensionMismatch,
                    "chromosome length " + std::to_string(c.keys.size()) + " != pool size " +
                        std::to_string(n));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (c.keys[a] != c.keys[b]) return c.keys[a] < c.keys[b];
        return ctx.chunk_id(a) < ctx.chunk_id(b);
    });

    const bool constrained = cfg.constraints_enabled;
    std::vector<char> accepted(n, 0);
    std::vector<std::size_t> plan_order;
    long long total = 0;

    auto redundant = [&](std::size_t idx, std::size_t skip) {
        for (std::size_t m : plan_order) {
            if (m == skip) continue;
            if (ctx.pair_similarity(idx, m) > cfg.redundancy_threshold) return true;
        }
        return false;
    };
    const std::size_t no_skip = n; // sentinel outside valid positions

    for (std::size_t idx : order) {
        if (constrained && ctx.query_similarity(idx) < cfg.min_query_similarity) continue;
        if (constrained && redundant(idx, no_skip)) continue;
        if (total + ctx.token_count(idx) > cfg.budget_tokens) continue;
        accepted[idx] = 1;
        plan_order.push_back(idx);
        total += ctx.token_count(idx);
    }

    bool theme_met = true;
    if (constrained && cfg.min_theme_clusters > 0) {
        std::vector<int> local;
        const std::vector<int>* labels;
        if (ctx.has_theme_labels()) {
            labels = &ctx.theme_labels();
        } else {
            local = compute_theme_labels(ctx, cfg).labels;
            labels = &local;
        }

        auto covered = [&] {
            std::set<int> s;
            for (std::size_t m : plan_order) s.insert((*labels)[m]);
            return s;
        };

        std::set<int> cov = covered();
        std::size_t attempts = 0;
        while (cov.size() < cfg.min_theme_clusters && attempts < n && !plan_order.empty()) {
            ++attempts;
            std::size_t victim_slot = 0;
            for (std::size_t s = 1; s < plan_order.size(); ++s) {
                std::size_t a = plan_order[victim_slot], b = plan_order[s];
                if (c.keys[b] > c.keys[a] ||
                    (c.keys[b] == c.keys[a] && ctx.chunk_id(b) > ctx.chunk_id(a)))
                    victim_slot = s;
            }
            const std::size_t victim = plan_order[victim_slot];
            const long long freed = total - ctx.token_count(victim);

            std::size_t incoming = n;
            for (std::size_t idx : order) {
                if (accepted[idx]) continue;
                if (cov.count((*labels)[idx])) continue;
                if (ctx.query_similarity(idx) < cfg.min_query_similarity) continue;
                if (redundant(idx, victim)) continue;
                if (freed + ctx.token_count(idx) > cfg.budget_tokens) continue;
                incoming = idx;
                break;
            }
            if (incoming == n) break;

            accepted[victim] = 0;
            plan_order.erase(plan_order.begin() + static_cast<std::ptrdiff_t>(victim_slot));
            accepted[incoming] = 1;
            plan_order.push_back(incoming);
            total = freed + ctx.token_count(incoming);
            cov = covered();
        }
        theme_met = cov.size() >= cfg.min_theme_clusters;
    }

    fitness::EvidencePlan plan;
    plan.question_id = ctx.question_id();
    plan.chunk_ids.reserve(plan_order.size());
    for (std::size_t m : plan_order) plan.chunk_ids.push_back(ctx.chunk_id(m));
    plan.total_tokens = total;
    plan.theme_constraint_met = theme_met;
    return plan;
}

namespace detail {

struct Individual {
    Chromosome chrom;
    fitness::EvidencePlan plan;
    double fit = 0.0;
};

inline Chromosome random_chromosome(std::size_t n, Rng& rng) {
    Chromosome c;
    c.keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) c.keys.push_back(rng.uniform());
    return c;
}

} // namespace detail

/// The BRKGA loop. Elites are carried unchanged; offspring take each key
/// from the elite parent with probability elite_inherit_prob; one fresh
/// mutant is injected per generation. Stops at max_generations or after
/// stagnation_limit generations without a >1e-12 improvement of the best
/// fitness. The initial population counts as generation 1.
inline std::pair<fitness::EvidencePlan, EvolutionTrace>
evolve(fitness::FitnessContext& ctx, const BrkgaConfig& cfg, const fitness::FitnessWeights& w) {
    cfg.validate();
    w.validate();
    if (ctx.pool_size() == 0) throw Error(ErrorCode::EmptyPool, "evolve over an empty pool");
    if (ctx.budget() != cfg.budget_tokens)
        throw Error(ErrorCode::ConfigurationError,
                    "context budget " + std::to_string(ctx.budget()) + " != config budget " +
                        std::to_string(cfg.budget_tokens));
    if (cfg.constraints_enabled && cfg.min_theme_clusters > 0) prepare_theme_labels(ctx, cfg);

    const std::size_t n = ctx.pool_size();
    const std::size_t P = cfg.population_size;
    const std::size_t elites = cfg.elite_count();
    const std::uint64_t random_fitness_seed = mix64(cfg.seed ^ fnv1a64("fitness.random"));

    Rng init_rng = Rng::substream(cfg.seed, "brkga.init");
    Rng cross_rng = Rng::substream(cfg.seed, "brkga.crossover");
    Rng mutant_rng = Rng::substream(cfg.seed, "brkga.mutant");

    EvolutionTrace trace;
    auto evaluate = [&](const Chromosome& c) {
        detail::Individual ind;
        ind.chrom = c;
        ind.plan = decode(c, ctx, cfg);
        ind.fit = cfg.use_random_fitness
                      ? fitness::random_fitness(ind.plan, random_fitness_seed)
                      : fitness::fitness(ind.plan, ctx, w);
        ++trace.fitness_evaluations;
        return ind;
    };

    std::vector<detail::Individual> pop;
    pop.reserve(P);
    for (std::size_t i = 0; i < P; ++i) pop.push_back(evaluate(detail::random_chromosome(n, init_rng)));

    auto sort_desc = [](std::vector<detail::Individual>& v) {
        std::stable_sort(v.begin(), v.end(),
                         [](const detail::Individual& a, const detail::Individual& b) {
                             return a.fit > b.fit;
                         });
    };
    sort_desc(pop);

    double best = pop[0].fit;
    fitness::EvidencePlan best_plan = pop[0].plan;
    std::size_t stagnation = 0;
    std::size_t generation = 1;

    auto record = [&] {
        GenerationStats st;
        st.generation = generation;
        st.best_fitness = best;
        st.stagnation = stagnation;
        double fsum = 0.0, csum = 0.0, tsum = 0.0;
        for (const auto& ind : pop) {
            fsum += ind.fit;
            csum += static_cast<double>(ind.plan.size());
            tsum += static_cast<double>(ind.plan.total_tokens);
            if (!ind.plan.theme_constraint_met) ++st.theme_violations;
        }
        st.mean_fitness = fsum / static_cast<double>(P);
        st.mean_plan_chunks = csum / static_cast<double>(P);
        st.mean_plan_tokens = tsum / static_cast<double>(P);
        trace.generations.push_back(st);
    };
    record();

    while (generation < cfg.max_generations && stagnation < cfg.stagnation_limit) {
        std::vector<detail::Individual> next;
        next.reserve(P);
        for (std::size_t e = 0; e < elites; ++e) next.push_back(pop[e]);

        const std::size_t non_elites = P - elites;
        const std::size_t offspring = P > elites + 1 ? P - elites - 1 : 0;
        for (std::size_t o = 0; o < offspring; ++o) {
            const Chromosome& ep = pop[cross_rng.uniform_below(elites)].chrom;
            const Chromosome& np = pop[elites + cross_rng.uniform_below(non_elites)].chrom;
            Chromosome child;
            child.keys.reserve(n);
            for (std::size_t k = 0; k < n; ++k)
                child.keys.push_back(cross_rng.uniform() < cfg.elite_inherit_prob ? ep.keys[k]
                                                                                  : np.keys[k]);
            next.push_back(evaluate(child));
        }
        while (next.size() < P) next.push_back(evaluate(detail::random_chromosome(n, mutant_rng)));

        pop = std::move(next);
        sort_desc(pop);
        ++generation;

        if (pop[0].fit > best + 1e-12) {
            best = pop[0].fit;
            best_plan = pop[0].plan;
            trace.best_generation = generation;
            stagnation = 0;
        } else {
            ++stagnation;
        }
        record();
    }
    trace.stopped_by_stagnation = stagnation >= cfg.stagnation_limit;
    return {std::move(best_plan), std::move(trace)};
}

/// End-to-end selection for one question: pool, context, optional hybrid
/// BM25 scores, then evolve. The scorer callback keeps lexical scoring
/// injectable without coupling this header to the index implementation.
using PoolScorer = std::function<std::vector<double>(const corpus::CandidatePool&)>;

struct SelectionOutcome {
    fitness::EvidencePlan plan;
    EvolutionTrace trace;
    std::size_t pool_size = 0;
};

inline SelectionOutcome select_gadmec(const corpus::Question& q, const corpus::CorpusStore& store,
                                      const BrkgaConfig& cfg, const fitness::FitnessWeights& w,
                                      std::size_t pool_k = 100,
                                      const PoolScorer& bm25_scorer = {}) {
    if (store.size() == 0)
        throw Error(ErrorCode::EmptyPool, "no candidates for question '" + q.question_id + "'");
    auto pool = corpus::build_candidate_pool(q, store, pool_k);
    auto ctx = fitness::make_context(pool, store, q, cfg.budget_tokens);
    if (w.zeta != 0.0) {
        if (!bm25_scorer)
            throw Error(ErrorCode::ConfigurationError,
                        "hybrid weights need a BM25 scorer for the candidate pool");
        ctx.set_bm25_scores(bm25_scorer(pool));
    }
    auto [plan, trace] = evolve(ctx, cfg, w);
    SelectionOutcome out;
    out.plan = std::move(plan);
    out.trace = std::move(trace);
    out.pool_size = pool.entries.size();
    return out;
}

} // namespace gadmec::brkga
