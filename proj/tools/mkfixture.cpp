// Generates a self-contained synthetic fixture: a clustered corpus with
// embeddings, cross-subfield questions, externally-supplied answer files for
// four methods, a manifest, a judge prompt, and a run config wired to all of
// it. Everything is deterministic under --seed.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gadmec/corpus.hpp"
#include "gadmec/jsonl.hpp"
#include "gadmec/judging.hpp"
#include "gadmec/rng.hpp"
#include "gadmec/sha256.hpp"

namespace {

using gadmec::EmbeddingVector;
using gadmec::Rng;

std::vector<std::string> make_vocabulary(Rng& rng, std::size_t n_words) {
    static const char* heads[] = {"lat", "pol", "gra", "vor", "den", "mes", "tor",
                                  "sil", "cur", "pha", "ban", "hel", "mag", "ort"};
    static const char* tails[] = {"ite", "on", "ium", "ance", "ex", "ard", "osis",
                                  "ule", "ine", "or", "ase", "ent"};
    std::vector<std::string> vocab;
    vocab.reserve(n_words);
    while (vocab.size() < n_words) {
        std::string w = heads[rng.uniform_below(14)];
        w += tails[rng.uniform_below(12)];
        if (rng.uniform() < 0.4) w += heads[rng.uniform_below(14)];
        vocab.push_back(std::move(w));
    }
    return vocab;
}

std::string make_text(Rng& rng, const std::vector<std::string>& vocab, std::size_t n_words) {
    std::string text;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i) text.push_back(' ');
        text += vocab[rng.uniform_below(vocab.size())];
    }
    return text;
}

EmbeddingVector noisy_direction(Rng& rng, std::size_t dim, std::size_t axis,
                                double axis_weight) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
    v[axis % dim] += axis_weight;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    EmbeddingVector out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic fixture generator"};
    std::string out_dir;
    std::size_t n_questions = 24;
    std::size_t n_combinations = 10;
    std::size_t chunks_per_combination = 40;
    std::size_t dim = 16;
    std::uint64_t seed = 7;
    long long budget = 2000;
    app.add_option("--out", out_dir, "fixture directory")->required();
    app.add_option("--questions", n_questions, "number of questions");
    app.add_option("--combinations", n_combinations, "number of cross-subfield combinations");
    app.add_option("--chunks-per-combination", chunks_per_combination, "corpus density");
    app.add_option("--dim", dim, "embedding dimension");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--budget", budget, "evidence budget in tokens");
    CLI11_PARSE(app, argc, argv);

    if (dim < n_combinations) {
        std::cerr << "error: --dim must be at least --combinations\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(out_dir);
        Rng vocab_rng = Rng::substream(seed, "fixture.vocab");
        const auto shared_vocab = make_vocabulary(vocab_rng, 120);

        std::vector<std::vector<std::string>> combo_vocab(n_combinations);
        for (std::size_t c = 0; c < n_combinations; ++c) {
            Rng r = Rng::substream(seed, "fixture.combo_vocab", c);
            combo_vocab[c] = make_vocabulary(r, 30);
        }

        // Chunks: each combination is a cluster on its own axis.
        std::vector<nlohmann::json> chunk_rows;
        gadmec::corpus::EmbeddingTable table;
        table.dimension = dim;
        std::vector<std::string> paper_ids;
        std::size_t chunk_counter = 0;
        for (std::size_t c = 0; c < n_combinations; ++c) {
            for (std::size_t p = 0; p < 4; ++p)
                paper_ids.push_back("paper_" + std::to_string(c) + "_" + std::to_string(p));
            for (std::size_t k = 0; k < chunks_per_combination; ++k) {
                Rng r = Rng::substream(seed, "fixture.chunk", chunk_counter);
                const std::size_t n_words = 40 + r.uniform_below(181); // 40..220 tokens
                std::vector<std::string> mixed = combo_vocab[c];
                mixed.insert(mixed.end(), shared_vocab.begin(), shared_vocab.end());
                char idbuf[32];
                std::snprintf(idbuf, sizeof(idbuf), "chunk_%05zu", chunk_counter);
                nlohmann::json row;
                row["chunk_id"] = idbuf;
                row["paper_id"] = "paper_" + std::to_string(c) + "_" + std::to_string(k % 4);
                row["text"] = make_text(r, mixed, n_words);
                row["token_count"] = n_words;
                chunk_rows.push_back(std::move(row));
                table.entries.emplace_back(idbuf, noisy_direction(r, dim, c, 0.8));
                ++chunk_counter;
            }
        }
        {
            std::ofstream out(out_dir + "/chunks.jsonl", std::ios::binary);
            for (const auto& row : chunk_rows) out << row.dump() << "\n";
        }
        gadmec::corpus::write_embedding_table_jsonl(table, out_dir + "/embeddings.jsonl");

        // Manifest over paper ids.
        {
            std::sort(paper_ids.begin(), paper_ids.end());
            nlohmann::json papers = nlohmann::json::array();
            for (const auto& id : paper_ids) {
                nlohmann::json p;
                p["paper_id"] = id;
                p["sha256"] = gadmec::sha256_hex(id);
                papers.push_back(std::move(p));
            }
            nlohmann::json m;
            m["area"] = "mixed";
            m["papers"] = papers;
            m["paper_count"] = paper_ids.size();
            m["chunk_count"] = chunk_rows.size();
            gadmec::artifact::write_json(out_dir + "/manifest.json", m);
        }

        // Questions round-robin over combinations, embeddings near the axis.
        std::vector<nlohmann::json> question_rows;
        for (std::size_t i = 0; i < n_questions; ++i) {
            const std::size_t c = i % n_combinations;
            Rng r = Rng::substream(seed, "fixture.question", i);
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "q_%04zu", i);
            nlohmann::json row;
            row["question_id"] = idbuf;
            row["combination_id"] = "combo_" + std::to_string(c);
            row["area"] = (c % 2 == 0) ? "cs_ml" : "materials";
            row["regime"] = (c < n_combinations / 2) ? "TOP" : "NICHO";
            std::vector<std::string> mixed = combo_vocab[c];
            mixed.insert(mixed.end(), shared_vocab.begin(), shared_vocab.end());
            row["text"] = "How does " + make_text(r, combo_vocab[c], 3) + " interact with " +
                          make_text(r, mixed, 4) + "?";
            row["query_embedding"] = noisy_direction(r, dim, c, 1.5);
            nlohmann::json subs = nlohmann::json::array();
            for (int s = 0; s < 3; ++s) subs.push_back(noisy_direction(r, dim, c, 1.0));
            row["subaspect_embeddings"] = std::move(subs);
            question_rows.push_back(std::move(row));
        }
        {
            std::ofstream out(out_dir + "/questions.jsonl", std::ios::binary);
            for (const auto& row : question_rows) out << row.dump() << "\n";
        }

        // Externally-supplied answers for the four standard arms.
        const std::vector<std::string> methods = {"gadmec", "greedy", "mmr", "bm25"};
        for (const auto& method : methods) {
            std::vector<nlohmann::json> rows;
            for (std::size_t i = 0; i < n_questions; ++i) {
                const std::size_t c = i % n_combinations;
                Rng r = Rng::substream(seed, "fixture.answer|" + method, i);
                std::vector<std::string> mixed = combo_vocab[c];
                mixed.insert(mixed.end(), shared_vocab.begin(), shared_vocab.end());
                gadmec::judging::AnswerRecord a;
                char idbuf[32];
                std::snprintf(idbuf, sizeof(idbuf), "q_%04zu", i);
                a.question_id = idbuf;
                a.method = method;
                a.answer_text = make_text(r, mixed, 60 + r.uniform_below(120));
                a.model_tag = "synthetic";
                a.completion_cap = 4096;
                a.finalize();
                rows.push_back(gadmec::artifact::answer_to_json(a));
            }
            nlohmann::json header;
            header["method"] = method;
            gadmec::artifact::write_jsonl(out_dir + "/answers_raw_" + method + ".jsonl",
                                          header, rows, gadmec::artifact::SCHEMA_ANSWERS);
        }

        // Judge prompt (the fixture is self-contained).
        gadmec::artifact::write_text(
            out_dir + "/judge_prompt_v1.txt",
            "Compare answer A and answer B to the question below.\n"
            "Question: {question}\nA: {answer_a}\nB: {answer_b}\n"
            "Reply with A, B, or TIE on the final line.\n");

        // The run config, paths relative to its own directory.
        std::string toml;
        toml += "[corpus]\n";
        toml += "chunks = \"chunks.jsonl\"\n";
        toml += "embeddings = \"embeddings.jsonl\"\n";
        toml += "manifest = \"manifest.json\"\n";
        toml += "token_counter = \"whitespace\"\n\n";
        toml += "[questions]\n";
        toml += "path = \"questions.jsonl\"\n\n";
        toml += "[selection]\n";
        toml += "presets = [\"gadmec\", \"greedy\", \"mmr\", \"bm25\"]\n";
        toml += "pool_k = 100\n";
        toml += "budget_tokens = " + std::to_string(budget) + "\n";
        toml += "mmr_lambda = 0.5\n\n";
        toml += "[judge]\n";
        toml += "backend = \"mock\"\n";
        toml += "template = \"judge_prompt_v1.txt\"\n";
        toml += "mock_policy = \"seeded_random\"\n";
        toml += "mock_p_tie = 0.1\n";
        toml += "mock_win_rate = 0.58\n";
        toml += "mock_focal = \"gadmec\"\n";
        toml += "seed = 42\n\n";
        toml += "[answers]\n";
        for (const auto& method : methods)
            toml += method + " = \"answers_raw_" + method + ".jsonl\"\n";
        toml += "\n[analysis]\n";
        toml += "bootstrap_replicates = 2000\n";
        toml += "wild_replicates = 1999\n";
        toml += "seed = 42\n";
        toml += "status = \"registered\"\n\n";
        toml += "[output]\n";
        toml += "dir = \"run\"\n";
        gadmec::artifact::write_text(out_dir + "/config.toml", toml);

        std::cout << out_dir << "/config.toml\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
