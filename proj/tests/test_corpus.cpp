#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "gadmec/corpus.hpp"

using namespace gadmec;
using namespace gadmec::corpus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               fs::path("gadmec_corpus_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace

TEST_CASE("store rejects duplicates, bad vectors, and mixed dimensions") {
    CorpusStore store;
    store.add({"c1", "p1", "alpha", 3, 0}, {1.0f, 0.0f});
    CHECK(store.size() == 1);
    CHECK(store.dimension() == 2);
    CHECK(store.has("c1"));
    CHECK_FALSE(store.has("c2"));
    CHECK(store.chunk("c1").paper_id == "p1");

    CHECK_THROWS_AS(store.add({"c1", "p1", "again", 3, 0}, {0.5f, 0.5f}), Error);
    CHECK_THROWS_AS(store.add({"c2", "p1", "x", 3, 0}, {1.0f, 0.0f, 0.0f}), Error);
    CHECK_THROWS_AS(store.add({"c3", "p1", "x", 3, 0}, {0.0f, 0.0f}), Error);
    CHECK_THROWS_AS(store.add({"c4", "p1", "x", 3, 0}, {}), Error);
    CHECK_THROWS_AS(
        store.add({"c5", "p1", "x", 3, 0}, {1.0f, std::numeric_limits<float>::quiet_NaN()}),
        Error);
    CHECK_THROWS_AS(store.index_of("nope"), Error);

    try {
        store.add({"c1", "p1", "again", 3, 0}, {0.5f, 0.5f});
        FAIL("expected duplicate-id error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateId);
    }
}

TEST_CASE("embedding tables round-trip through both on-disk forms") {
    TempDir tmp;
    EmbeddingTable table;
    table.dimension = 3;
    table.entries = {{"a", {1.0f, 2.5f, -0.125f}}, {"b", {0.0f, 1e-7f, 42.0f}}};

    write_embedding_table_jsonl(table, tmp.file("e.jsonl"));
    auto back = load_embedding_table(tmp.file("e.jsonl"));
    REQUIRE(back.dimension == 3);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].first == "a");
    CHECK(back.entries[0].second == table.entries[0].second);
    CHECK(back.entries[1].second == table.entries[1].second);

    write_embedding_table_binary(table, tmp.file("e.bin"));
    auto bin = load_embedding_table(tmp.file("e.bin"));
    REQUIRE(bin.dimension == 3);
    REQUIRE(bin.entries.size() == 2);
    CHECK(bin.entries[0].first == "a");
    CHECK(bin.entries[0].second == table.entries[0].second);
    CHECK(bin.entries[1].second == table.entries[1].second);
}

TEST_CASE("embedding table loader enforces header shape and counts") {
    TempDir tmp;
    write_file(tmp.file("no_header.jsonl"), R"({"id":"a","values":[1.0]})"
                                            "\n");
    CHECK_THROWS_AS(load_embedding_table(tmp.file("no_header.jsonl")), Error);

    write_file(tmp.file("bad_count.jsonl"),
               "{\"dimension\":1,\"count\":2}\n{\"id\":\"a\",\"values\":[1.0]}\n");
    CHECK_THROWS_AS(load_embedding_table(tmp.file("bad_count.jsonl")), Error);

    write_file(tmp.file("bad_dim.jsonl"),
               "{\"dimension\":2,\"count\":1}\n{\"id\":\"a\",\"values\":[1.0]}\n");
    CHECK_THROWS_AS(load_embedding_table(tmp.file("bad_dim.jsonl")), Error);

    write_file(tmp.file("trunc.bin"), std::string("\x02\x00\x00\x00\x05", 5));
    CHECK_THROWS_AS(load_embedding_table(tmp.file("trunc.bin")), Error);

    CHECK_THROWS_AS(load_embedding_table(tmp.file("absent.jsonl")), Error);
}

TEST_CASE("load_corpus joins chunks with embeddings and fills token counts") {
    TempDir tmp;
    write_file(tmp.file("emb.jsonl"),
               "{\"dimension\":2,\"count\":2}\n"
               "{\"id\":\"c1\",\"values\":[1.0,0.0]}\n"
               "{\"id\":\"c2\",\"values\":[0.0,1.0]}\n");
    write_file(tmp.file("chunks.jsonl"),
               R"({"chunk_id":"c1","paper_id":"p1","text":"one two three","token_count":99})"
               "\n"
               R"({"chunk_id":"c2","paper_id":"p2","text":"four five"})"
               "\n");
    auto store = load_corpus(tmp.file("chunks.jsonl"), tmp.file("emb.jsonl"));
    REQUIRE(store.size() == 2);
    CHECK(store.chunk("c1").token_count == 99);
    CHECK(store.chunk("c2").token_count == 2);

    write_file(tmp.file("orphan.jsonl"), R"({"chunk_id":"c9","text":"x"})"
                                         "\n");
    CHECK_THROWS_AS(load_corpus(tmp.file("orphan.jsonl"), tmp.file("emb.jsonl")), Error);

    write_file(tmp.file("neg.jsonl"),
               R"({"chunk_id":"c1","text":"x","token_count":-1})"
               "\n");
    CHECK_THROWS_AS(load_corpus(tmp.file("neg.jsonl"), tmp.file("emb.jsonl")), Error);

    write_file(tmp.file("empty.jsonl"), "");
    CHECK_THROWS_AS(load_corpus(tmp.file("empty.jsonl"), tmp.file("emb.jsonl")), Error);
}

TEST_CASE("questions load with inline or referenced embeddings") {
    TempDir tmp;
    write_file(tmp.file("q.jsonl"),
               R"({"question_id":"q1","text":"t","area":"CSML","combination_id":"combo_a","regime":"TOP","query_embedding":[1.0,0.0],"subaspect_embeddings":[[0.0,1.0]]})"
               "\n"
               R"({"question_id":"q2","text":"u","area":"weird","combination_id":"combo_b","query_embedding":[0.5,0.5]})"
               "\n");
    auto qs = load_questions(tmp.file("q.jsonl"));
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].area.kind == AreaKind::CSML);
    CHECK(qs[0].regime == Regime::TOP);
    CHECK(qs[0].subaspect_embeddings.size() == 1);
    CHECK(qs[1].area.kind == AreaKind::OTHER);
    CHECK(qs[1].area.label == "weird");
    CHECK(qs[1].regime == Regime::UNSPECIFIED);

    EmbeddingTable refs;
    refs.dimension = 2;
    refs.entries = {{"qv", {0.0f, 2.0f}}, {"sv", {1.0f, 1.0f}}};
    write_file(tmp.file("qr.jsonl"),
               R"({"question_id":"q1","combination_id":"c","query_embedding_ref":"qv","subaspect_embedding_refs":["sv"]})"
               "\n");
    auto qr = load_questions(tmp.file("qr.jsonl"), &refs);
    REQUIRE(qr.size() == 1);
    CHECK(qr[0].query_embedding == EmbeddingVector{0.0f, 2.0f});
    CHECK(qr[0].subaspect_embeddings[0] == EmbeddingVector{1.0f, 1.0f});

    write_file(tmp.file("qbad.jsonl"),
               R"({"question_id":"q1","combination_id":"c","query_embedding_ref":"nope"})"
               "\n");
    CHECK_THROWS_AS(load_questions(tmp.file("qbad.jsonl"), &refs), Error);

    write_file(tmp.file("qnocombo.jsonl"),
               R"({"question_id":"q1","query_embedding":[1.0,0.0]})"
               "\n");
    CHECK_THROWS_AS(load_questions(tmp.file("qnocombo.jsonl")), Error);

    write_file(tmp.file("qdup.jsonl"),
               R"({"question_id":"q1","combination_id":"c","query_embedding":[1.0,0.0]})"
               "\n"
               R"({"question_id":"q1","combination_id":"c","query_embedding":[1.0,0.0]})"
               "\n");
    CHECK_THROWS_AS(load_questions(tmp.file("qdup.jsonl")), Error);

    write_file(tmp.file("qzero.jsonl"),
               R"({"question_id":"q1","combination_id":"c","query_embedding":[0.0,0.0]})"
               "\n");
    CHECK_THROWS_AS(load_questions(tmp.file("qzero.jsonl")), Error);
}

TEST_CASE("candidate pools sort by similarity then id and drop empty chunks") {
    CorpusStore store;
    store.add({"c", "p", "x", 5, 0}, {1.0f, 0.0f});
    store.add({"b", "p", "x", 5, 0}, {2.0f, 2.0f});
    store.add({"a", "p", "x", 5, 0}, {1.0f, 1.0f});
    store.add({"d", "p", "x", 5, 0}, {0.0f, 1.0f});
    store.add({"e", "p", "x", 0, 0}, {1.0f, 0.0f}); // zero tokens, never pooled

    Question q;
    q.question_id = "q1";
    q.combination_id = "combo";
    q.query_embedding = {1.0f, 0.0f};

    auto pool = build_candidate_pool(q, store, 100);
    REQUIRE(pool.entries.size() == 4);
    CHECK(pool.entries[0].chunk_id == "c");
    CHECK_THAT(pool.entries[0].query_similarity, Catch::Matchers::WithinAbs(1.0, 1e-12));
    // "a" and "b" point the same way; the tie resolves alphabetically.
    CHECK(pool.entries[1].chunk_id == "a");
    CHECK(pool.entries[2].chunk_id == "b");
    CHECK_THAT(pool.entries[1].query_similarity,
               Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 1e-12));
    CHECK(pool.entries[1].query_similarity == pool.entries[2].query_similarity);
    CHECK(pool.entries[3].chunk_id == "d");

    auto top2 = build_candidate_pool(q, store, 2);
    REQUIRE(top2.entries.size() == 2);
    CHECK(top2.entries[0].chunk_id == "c");
    CHECK(top2.entries[1].chunk_id == "a");

    CorpusStore empty;
    CHECK_THROWS_AS(build_candidate_pool(q, empty, 10), Error);
    CHECK_THROWS_AS(build_candidate_pool(q, store, 0), Error);
}

TEST_CASE("manifest verification recomputes paper digests") {
    TempDir tmp;
    const std::string p1 = sha256_hex("paper_1");
    const std::string p2_wrong(64, 'a');
    write_file(tmp.file("manifest.json"),
               std::string("{\"area\":\"mixed\",\"papers\":[") +
                   "{\"paper_id\":\"paper_1\",\"sha256\":\"" + p1 + "\"}," +
                   "{\"paper_id\":\"paper_2\",\"sha256\":\"" + p2_wrong + "\"}]," +
                   "\"paper_count\":2,\"chunk_count\":10}");
    auto m = load_manifest(tmp.file("manifest.json"));
    CHECK(m.area == "mixed");
    CHECK(m.paper_count == 2);
    CHECK(m.chunk_count == 10);

    auto report = verify_manifest(m, {"paper_1", "paper_2", "paper_3", "paper_1"});
    REQUIRE(report.matched == std::vector<std::string>{"paper_1"});
    REQUIRE(report.mismatched == std::vector<std::string>{"paper_2"});
    REQUIRE(report.missing == std::vector<std::string>{"paper_3"});
    CHECK_FALSE(report.ok());

    auto clean = verify_manifest(m, {"paper_1"});
    CHECK(clean.ok());

    CorpusManifest bad;
    bad.papers = {{"p", "not-hex"}};
    try {
        verify_manifest(bad, {"p"});
        FAIL("expected malformed-manifest error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedManifest);
    }
}
