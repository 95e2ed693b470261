#pragma once

// Corpus ingestion: chunked text, precomputed embeddings, questions, and
// manifests. Everything here is read-only after load; selection modules only
// ever see a CorpusStore and the per-question CandidatePool built from it.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gadmec/embedding.hpp"
#include "gadmec/error.hpp"
#include "gadmec/sha256.hpp"
#include "gadmec/text.hpp"

namespace gadmec::corpus {

struct Chunk {
    std::string chunk_id;
    std::string paper_id;
    std::string text;
    long long token_count = 0; // units of the counter recorded in the run log
    std::size_t embedding_ref = 0;
};

enum class AreaKind { CSML, MATSCI, OTHER };

struct Area {
    AreaKind kind = AreaKind::OTHER;
    std::string label; // original label, kept for OTHER areas

    static Area from_label(const std::string& s) {
        if (s == "CSML" || s == "CS/ML" || s == "csml") return {AreaKind::CSML, "CSML"};
        if (s == "MATSCI" || s == "MatSci" || s == "matsci") return {AreaKind::MATSCI, "MATSCI"};
        return {AreaKind::OTHER, s};
    }
};

enum class Regime { TOP, NICHO, UNSPECIFIED };

inline Regime regime_from_label(const std::string& s) {
    if (s == "TOP" || s == "top") return Regime::TOP;
    if (s == "NICHO" || s == "nicho") return Regime::NICHO;
    return Regime::UNSPECIFIED;
}

inline const char* regime_label(Regime r) {
    switch (r) {
        case Regime::TOP: return "TOP";
        case Regime::NICHO: return "NICHO";
        default: return "UNSPECIFIED";
    }
}

struct Question {
    std::string question_id;
    std::string text;
    Area area;
    std::string combination_id; // inference clusters on this, must be non-empty
    Regime regime = Regime::UNSPECIFIED;
    EmbeddingVector query_embedding;
    std::vector<EmbeddingVector> subaspect_embeddings;
};

struct PoolEntry {
    std::string chunk_id;
    double query_similarity = 0.0;
};

/// Per-question top-K candidates, sorted by query similarity descending.
/// Ties break toward the lexicographically smaller chunk_id so pools are
/// identical across runs and platforms.
struct CandidatePool {
    std::string question_id;
    std::vector<PoolEntry> entries;
};

class CorpusStore {
  public:
    std::size_t size() const { return chunks_.size(); }
    std::size_t dimension() const { return dim_; }

    const Chunk& chunk_at(std::size_t i) const { return chunks_[i]; }
    const EmbeddingVector& embedding_at(std::size_t i) const { return embeddings_[i]; }

    bool has(const std::string& chunk_id) const { return index_.count(chunk_id) > 0; }

    std::size_t index_of(const std::string& chunk_id) const {
        auto it = index_.find(chunk_id);
        if (it == index_.end())
            throw Error(ErrorCode::UnknownId, "chunk '" + chunk_id + "' not in store");
        return it->second;
    }

    const Chunk& chunk(const std::string& chunk_id) const { return chunks_[index_of(chunk_id)]; }
    const EmbeddingVector& embedding(const std::string& chunk_id) const {
        return embeddings_[index_of(chunk_id)];
    }

    void add(Chunk c, EmbeddingVector e) {
        if (index_.count(c.chunk_id))
            throw Error(ErrorCode::DuplicateId, "chunk_id '" + c.chunk_id + "'");
        if (e.empty()) throw Error(ErrorCode::ZeroVector, "empty embedding for '" + c.chunk_id + "'");
        if (!all_finite(e))
            throw Error(ErrorCode::NonFiniteEmbedding, "chunk '" + c.chunk_id + "'");
        if (is_zero_vector(e))
            throw Error(ErrorCode::ZeroVector, "chunk '" + c.chunk_id + "'");
        if (dim_ == 0) {
            dim_ = e.size();
        } else if (e.size() != dim_) {
            throw Error(ErrorCode::DimensionMismatch,
                        "chunk '" + c.chunk_id + "' has dimension " + std::to_string(e.size()) +
                            ", corpus dimension is " + std::to_string(dim_));
        }
        c.embedding_ref = chunks_.size();
        index_.emplace(c.chunk_id, chunks_.size());
        chunks_.push_back(std::move(c));
        embeddings_.push_back(std::move(e));
    }

  private:
    std::vector<Chunk> chunks_;
    std::vector<EmbeddingVector> embeddings_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
};

// ---- file loading ----------------------------------------------------------

namespace detail {

inline nlohmann::json parse_json_line(const std::string& line, const std::string& file,
                                      std::size_t lineno) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError,
                    file + ":" + std::to_string(lineno) + ": " + e.what());
    }
}

inline EmbeddingVector vector_from_json(const nlohmann::json& arr, const std::string& where) {
    if (!arr.is_array()) throw Error(ErrorCode::ParseError, where + ": embedding is not an array");
    EmbeddingVector v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) throw Error(ErrorCode::ParseError, where + ": non-numeric entry");
        v.push_back(x.get<float>());
    }
    return v;
}

inline std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error(ErrorCode::ParseError, "truncated binary embedding file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

inline float read_f32_le(std::istream& in) {
    std::uint32_t u = read_u32_le(in);
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace detail

/// Embeddings keyed by id. Two on-disk forms are accepted:
///   - JSON lines: a header record {"dimension":D,"count":N}, then one
///     {"id":...,"values":[...]} per record;
///   - binary: u32le dimension, u32le count, then per record u32le id length,
///     id bytes, and D float32le values.
/// The text form is for fixtures and tests, the binary form for scale.
struct EmbeddingTable {
    std::size_t dimension = 0;
    std::vector<std::pair<std::string, EmbeddingVector>> entries;
};

inline EmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");

    // Sniff: the JSONL form starts with '{' and contains no NUL bytes.
    int first = in.peek();
    EmbeddingTable table;
    if (first == '{') {
        std::string line;
        std::size_t lineno = 0;
        bool have_header = false;
        std::uint64_t declared_count = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto j = detail::parse_json_line(line, path, lineno);
            if (!have_header) {
                if (!j.contains("dimension") || !j.contains("count"))
                    throw Error(ErrorCode::ParseError, path + ": missing header record");
                table.dimension = j.at("dimension").get<std::size_t>();
                declared_count = j.at("count").get<std::uint64_t>();
                have_header = true;
                continue;
            }
            std::string id = j.contains("id") ? j.at("id").get<std::string>()
                                              : j.at("chunk_id").get<std::string>();
            auto v = detail::vector_from_json(j.at("values"), path);
            if (v.size() != table.dimension)
                throw Error(ErrorCode::DimensionMismatch,
                            path + ": '" + id + "' has dimension " + std::to_string(v.size()));
            table.entries.emplace_back(std::move(id), std::move(v));
        }
        if (!have_header) throw Error(ErrorCode::ParseError, path + ": empty embedding file");
        if (declared_count != table.entries.size())
            throw Error(ErrorCode::ParseError,
                        path + ": header count " + std::to_string(declared_count) +
                            " != records " + std::to_string(table.entries.size()));
    } else {
        table.dimension = detail::read_u32_le(in);
        const std::uint32_t count = detail::read_u32_le(in);
        for (std::uint32_t r = 0; r < count; ++r) {
            const std::uint32_t idlen = detail::read_u32_le(in);
            std::string id(idlen, '\0');
            in.read(id.data(), idlen);
            if (!in) throw Error(ErrorCode::ParseError, path + ": truncated id record");
            EmbeddingVector v(table.dimension);
            for (std::size_t i = 0; i < table.dimension; ++i) v[i] = detail::read_f32_le(in);
            table.entries.emplace_back(std::move(id), std::move(v));
        }
    }
    return table;
}

inline void write_embedding_table_jsonl(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    nlohmann::json header;
    header["dimension"] = table.dimension;
    header["count"] = table.entries.size();
    out << header.dump() << "\n";
    for (const auto& [id, v] : table.entries) {
        nlohmann::json j;
        j["id"] = id;
        j["values"] = v;
        out << j.dump() << "\n";
    }
}

inline void write_embedding_table_binary(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    auto put_u32 = [&](std::uint32_t u) {
        unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                              static_cast<unsigned char>(u >> 16),
                              static_cast<unsigned char>(u >> 24)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    put_u32(static_cast<std::uint32_t>(table.dimension));
    put_u32(static_cast<std::uint32_t>(table.entries.size()));
    for (const auto& [id, v] : table.entries) {
        put_u32(static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (float f : v) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_u32(u);
        }
    }
}

/// Load the chunk JSONL and the matching embedding file into one store.
/// token_count is recomputed with `counter` when a record omits it.
inline CorpusStore load_corpus(const std::string& chunk_file, const std::string& embedding_file,
                               const TokenCounter& counter = TokenCounter::by_name("whitespace")) {
    auto table = load_embedding_table(embedding_file);
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        if (!by_id.emplace(table.entries[i].first, i).second)
            throw Error(ErrorCode::DuplicateId,
                        "embedding id '" + table.entries[i].first + "'");
    }

    std::ifstream in(chunk_file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + chunk_file + "'");
    CorpusStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = detail::parse_json_line(line, chunk_file, lineno);
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.paper_id = j.value("paper_id", std::string{});
        c.text = j.value("text", std::string{});
        if (j.contains("token_count")) {
            c.token_count = j.at("token_count").get<long long>();
            if (c.token_count < 0)
                throw Error(ErrorCode::ParseError,
                            chunk_file + ":" + std::to_string(lineno) + ": negative token_count");
        } else {
            c.token_count = counter.count(c.text);
        }
        auto it = by_id.find(c.chunk_id);
        if (it == by_id.end())
            throw Error(ErrorCode::UnknownId,
                        "chunk '" + c.chunk_id + "' has no embedding in '" + embedding_file + "'");
        store.add(std::move(c), table.entries[it->second].second);
    }
    if (store.size() == 0) throw Error(ErrorCode::EmptyStore, "'" + chunk_file + "' held no chunks");
    return store;
}

/// Questions come as JSON lines. Embeddings may be inline ("query_embedding",
/// "subaspect_embeddings") or references ("query_embedding_ref",
/// "subaspect_embedding_refs") into a separately loaded table.
inline std::vector<Question> load_questions(const std::string& path,
                                            const EmbeddingTable* refs = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");

    std::unordered_map<std::string, const EmbeddingVector*> ref_index;
    if (refs) {
        for (const auto& [id, v] : refs->entries) ref_index.emplace(id, &v);
    }
    auto resolve = [&](const std::string& id) -> const EmbeddingVector& {
        auto it = ref_index.find(id);
        if (it == ref_index.end())
            throw Error(ErrorCode::UnknownId, "embedding ref '" + id + "' unresolved");
        return *it->second;
    };

    std::vector<Question> out;
    std::unordered_map<std::string, bool> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = detail::parse_json_line(line, path, lineno);
        Question q;
        q.question_id = j.at("question_id").get<std::string>();
        if (!seen.emplace(q.question_id, true).second)
            throw Error(ErrorCode::DuplicateId, "question_id '" + q.question_id + "'");
        q.text = j.value("text", std::string{});
        q.area = Area::from_label(j.value("area", std::string{}));
        q.combination_id = j.value("combination_id", std::string{});
        if (q.combination_id.empty())
            throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) +
                                                   ": combination_id missing or empty");
        q.regime = regime_from_label(j.value("regime", std::string{}));
        if (j.contains("query_embedding")) {
            q.query_embedding = detail::vector_from_json(j.at("query_embedding"), path);
        } else if (j.contains("query_embedding_ref")) {
            q.query_embedding = resolve(j.at("query_embedding_ref").get<std::string>());
        } else {
            throw Error(ErrorCode::ParseError,
                        path + ":" + std::to_string(lineno) + ": no query embedding");
        }
        if (!all_finite(q.query_embedding) )
            throw Error(ErrorCode::NonFiniteEmbedding, "question '" + q.question_id + "'");
        if (is_zero_vector(q.query_embedding))
            throw Error(ErrorCode::ZeroVector, "question '" + q.question_id + "'");
        if (j.contains("subaspect_embeddings")) {
            for (const auto& arr : j.at("subaspect_embeddings"))
                q.subaspect_embeddings.push_back(detail::vector_from_json(arr, path));
        } else if (j.contains("subaspect_embedding_refs")) {
            for (const auto& r : j.at("subaspect_embedding_refs"))
                q.subaspect_embeddings.push_back(resolve(r.get<std::string>()));
        }
        for (const auto& s : q.subaspect_embeddings) {
            if (!all_finite(s) || is_zero_vector(s))
                throw Error(ErrorCode::NonFiniteEmbedding,
                            "sub-aspect of question '" + q.question_id + "'");
        }
        out.push_back(std::move(q));
    }
    return out;
}

// ---- candidate pools -------------------------------------------------------

/// Top-k cosine pre-filter over the whole store. Chunks with token_count <= 0
/// are never admitted. Fewer than k entries are returned when the corpus is
/// smaller.
inline CandidatePool build_candidate_pool(const Question& q, const CorpusStore& store,
                                          std::size_t k = 100) {
    if (store.size() == 0) throw Error(ErrorCode::EmptyStore, "cannot pool an empty store");
    if (k < 1) throw Error(ErrorCode::ConfigurationError, "pool k must be >= 1");

    std::vector<PoolEntry> all;
    all.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Chunk& c = store.chunk_at(i);
        if (c.token_count <= 0) continue;
        all.push_back({c.chunk_id, cosine_similarity(store.embedding_at(i), q.query_embedding)});
    }
    std::sort(all.begin(), all.end(), [](const PoolEntry& a, const PoolEntry& b) {
        if (a.query_similarity != b.query_similarity)
            return a.query_similarity > b.query_similarity;
        return a.chunk_id < b.chunk_id;
    });
    if (all.size() > k) all.resize(k);
    return CandidatePool{q.question_id, std::move(all)};
}

// ---- manifests -------------------------------------------------------------

struct ManifestEntry {
    std::string paper_id;
    std::string sha256_hex; // 64 lowercase hex chars
};

struct CorpusManifest {
    std::string area;
    std::vector<ManifestEntry> papers;
    long long paper_count = 0;
    long long chunk_count = 0;
};

inline CorpusManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
    CorpusManifest m;
    m.area = j.value("area", std::string{});
    for (const auto& p : j.at("papers")) {
        m.papers.push_back({p.at("paper_id").get<std::string>(),
                            p.at("sha256").get<std::string>()});
    }
    m.paper_count = j.value("paper_count", static_cast<long long>(m.papers.size()));
    m.chunk_count = j.value("chunk_count", 0ll);
    return m;
}

struct VerificationReport {
    std::vector<std::string> matched;
    std::vector<std::string> mismatched;
    std::vector<std::string> missing; // in the corpus but absent from the manifest
    bool ok() const { return mismatched.empty() && missing.empty(); }
};

inline bool valid_sha256_hex(const std::string& s) {
    if (s.size() != 64) return false;
    for (char c : s) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) return false;
    }
    return true;
}

/// Recompute SHA-256 over each paper id's UTF-8 bytes and compare with the
/// manifest. Order-independent and idempotent.
inline VerificationReport verify_manifest(const CorpusManifest& manifest,
                                          const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::string> expect;
    for (const auto& e : manifest.papers) {
        if (!valid_sha256_hex(e.sha256_hex))
            throw Error(ErrorCode::MalformedManifest,
                        "digest for '" + e.paper_id + "' is not 64 lowercase hex chars");
        expect[e.paper_id] = e.sha256_hex;
    }
    VerificationReport report;
    std::vector<std::string> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    sorted_ids.erase(std::unique(sorted_ids.begin(), sorted_ids.end()), sorted_ids.end());
    for (const auto& id : sorted_ids) {
        auto it = expect.find(id);
        if (it == expect.end()) {
            report.missing.push_back(id);
        } else if (sha256_hex(id) == it->second) {
            report.matched.push_back(id);
        } else {
            report.mismatched.push_back(id);
        }
    }
    return report;
}

} // namespace gadmec::corpus
