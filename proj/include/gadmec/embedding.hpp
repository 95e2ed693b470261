#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gadmec/error.hpp"

namespace gadmec {

/// Dense embedding, fixed dimension per corpus. Stored as float32 (the wire
/// format); all arithmetic accumulates in double.
using EmbeddingVector = std::vector<float>;

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

inline double norm(const EmbeddingVector& a) {
    return std::sqrt(dot(a, a));
}

inline bool all_finite(const EmbeddingVector& a) {
    for (float v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline bool is_zero_vector(const EmbeddingVector& a) {
    for (float v : a) {
        if (v != 0.0f) return false;
    }
    return true;
}

/// cos(a,b) = dot/(|a||b|), clamped to [-1,1] against rounding.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::DimensionMismatch, "cosine over dimensions " +
                                                      std::to_string(a.size()) + " vs " +
                                                      std::to_string(b.size()));
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0)
        throw Error(ErrorCode::ZeroVector, "cosine undefined for a zero vector");
    double c = dot(a, b) / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

/// Unweighted mean of a set of vectors (all same dimension, caller-checked).
inline std::vector<double> mean_vector(const std::vector<const EmbeddingVector*>& vs) {
    std::vector<double> m(vs.empty() ? 0 : vs[0]->size(), 0.0);
    for (const EmbeddingVector* v : vs) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += (*v)[i];
    }
    for (double& x : m) x /= static_cast<double>(vs.size());
    return m;
}

/// Cosine between a double-precision centroid and a float vector.
inline double cosine_centroid_query(const std::vector<double>& c, const EmbeddingVector& q) {
    if (c.size() != q.size())
        throw Error(ErrorCode::DimensionMismatch, "centroid/query dimension mismatch");
    double sc = 0.0, nc = 0.0, nq = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        sc += c[i] * q[i];
        nc += c[i] * c[i];
        nq += static_cast<double>(q[i]) * q[i];
    }
    if (nc == 0.0) throw Error(ErrorCode::ComponentUndefined, "zero centroid");
    if (nq == 0.0) throw Error(ErrorCode::ZeroVector, "zero query");
    double v = sc / (std::sqrt(nc) * std::sqrt(nq));
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    return v;
}

} // namespace gadmec
