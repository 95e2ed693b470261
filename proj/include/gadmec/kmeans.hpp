#pragma once

// Lloyd's k-means with deterministic k-means++ seeding. Used to assign
// thematic cluster labels over a candidate pool's embeddings; everything is
// plain double arithmetic in fixed iteration order so labels are identical
// across platforms for a given seed.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "gadmec/embedding.hpp"
#include "gadmec/error.hpp"
#include "gadmec/rng.hpp"

namespace gadmec::brkga {

struct KmeansResult {
    std::vector<int> labels;
    std::size_t k_effective = 0;
    std::size_t iterations = 0;
    bool converged = false;
    bool k_was_reduced = false;
};

namespace detail {

inline double sq_dist(const EmbeddingVector& a, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - c[i];
        s += d * d;
    }
    return s;
}

} // namespace detail

/// k-means++ seeding then Lloyd's iteration, capped at 100 rounds. Ties in
/// assignment go to the lowest center index; empty clusters keep their
/// previous center. k larger than the point count is reduced (flagged in the
/// result rather than raised, so callers can log it).
inline KmeansResult kmeans(const std::vector<EmbeddingVector>& vectors, std::size_t k,
                           std::uint64_t seed) {
    if (k < 1) throw Error(ErrorCode::ConfigurationError, "kmeans requires k >= 1");
    const std::size_t n = vectors.size();
    if (n == 0) throw Error(ErrorCode::ConfigurationError, "kmeans over zero vectors");

    KmeansResult result;
    result.k_was_reduced = k > n;
    if (k > n) k = n;
    result.k_effective = k;
    result.labels.assign(n, 0);
    if (k == 1) {
        result.converged = true;
        return result;
    }

    const std::size_t dim = vectors[0].size();
    Rng rng = Rng::substream(seed, "kmeans.seeding");

    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    std::vector<bool> chosen(n, false);

    auto copy_point = [&](std::size_t idx) {
        std::vector<double> c(dim);
        for (std::size_t i = 0; i < dim; ++i) c[i] = vectors[idx][i];
        chosen[idx] = true;
        return c;
    };

    centers.push_back(copy_point(rng.uniform_below(n)));
    std::vector<double> d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, detail::sq_dist(vectors[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = n - 1;
        } else {
            // All points coincide with existing centers; take the lowest
            // unchosen index so the run stays deterministic.
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = 0;
        }
        centers.push_back(copy_point(pick));
    }

    std::vector<int> labels(n, -1);
    for (std::size_t iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = detail::sq_dist(vectors[i], centers[0]);
            for (std::size_t c = 1; c < k; ++c) {
                double d = detail::sq_dist(vectors[i], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        result.iterations = iter + 1;
        if (!changed) {
            result.converged = true;
            break;
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[static_cast<std::size_t>(labels[i])];
            for (std::size_t d = 0; d < dim; ++d) s[d] += vectors[i][d];
            ++counts[static_cast<std::size_t>(labels[i])];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d)
                centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    result.labels = std::move(labels);
    return result;
}

} // namespace gadmec::brkga
