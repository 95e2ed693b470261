#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "gadmec/agreement.hpp"
#include "gadmec/rng.hpp"

using namespace gadmec;
using namespace gadmec::agreement;

namespace {

// counts[r][c] pairs where judge 1 said category r and judge 2 category c.
PairedVerdicts from_table(const std::vector<std::vector<int>>& counts) {
    PairedVerdicts pv;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        for (std::size_t c = 0; c < counts[r].size(); ++c) {
            for (int i = 0; i < counts[r][c]; ++i) {
                pv.judge1.push_back(static_cast<Category>(r));
                pv.judge2.push_back(static_cast<Category>(c));
            }
        }
    }
    return pv;
}

} // namespace

TEST_CASE("balanced binary table: kappa and AC1 coincide at 0.6") {
    // [[40,10],[10,40]]: p_a = 0.8, both marginals (0.5, 0.5).
    auto pv = from_table({{40, 10}, {10, 40}});
    CHECK_THAT(raw_agreement(pv), Catch::Matchers::WithinAbs(0.8, 1e-12));
    CHECK_THAT(cohens_kappa(pv), Catch::Matchers::WithinAbs(0.6, 1e-12));
    CHECK_THAT(cohens_kappa(pv, true), Catch::Matchers::WithinAbs(0.6, 1e-12));
    CHECK_THAT(gwet_ac1(pv, true), Catch::Matchers::WithinAbs(0.6, 1e-12));
    // Declared K=3 shrinks chance agreement, so ternary AC1 is higher.
    CHECK_THAT(gwet_ac1(pv), Catch::Matchers::WithinAbs(11.0 / 15.0, 1e-12));
}

TEST_CASE("skewed marginals: AC1 is robust where kappa collapses") {
    // [[93,2],[3,2]]: 95% raw agreement but both judges almost always pick X.
    auto pv = from_table({{93, 2}, {3, 2}});
    CHECK_THAT(raw_agreement(pv), Catch::Matchers::WithinAbs(0.95, 1e-12));
    const double k = cohens_kappa(pv, true);
    const double a = gwet_ac1(pv, true);
    CHECK_THAT(k, Catch::Matchers::WithinAbs(0.4186046511627907, 1e-12));
    CHECK_THAT(a, Catch::Matchers::WithinAbs(0.9452983972430392, 1e-12));
    CHECK(a > k);
}

TEST_CASE("three-category diagonal-heavy table") {
    // [[30,5,5],[5,20,5],[5,5,20]]: p_a = 0.70, marginals (0.4, 0.3, 0.3).
    auto pv = from_table({{30, 5, 5}, {5, 20, 5}, {5, 5, 20}});
    CHECK_THAT(raw_agreement(pv), Catch::Matchers::WithinAbs(0.70, 1e-12));
    CHECK_THAT(cohens_kappa(pv), Catch::Matchers::WithinAbs(0.36 / 0.66, 1e-12));
    CHECK_THAT(gwet_ac1(pv), Catch::Matchers::WithinAbs(0.37 / 0.67, 1e-12));
}

TEST_CASE("binary mode drops every pair in which either judge tied") {
    PairedVerdicts pv;
    auto push = [&](Category a, Category b) {
        pv.judge1.push_back(a);
        pv.judge2.push_back(b);
    };
    push(Category::MethodXWins, Category::MethodXWins);
    push(Category::Tie, Category::MethodXWins);        // dropped
    push(Category::MethodYWins, Category::Tie);        // dropped
    push(Category::Tie, Category::Tie);                // dropped
    push(Category::MethodYWins, Category::MethodYWins);
    push(Category::MethodXWins, Category::MethodYWins);

    auto bin = pv.without_ties();
    CHECK(bin.n_shared() == 3);
    CHECK_THAT(raw_agreement(bin), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));

    // pair_ids travel with the surviving rows.
    pv.pair_ids = {"p0", "p1", "p2", "p3", "p4", "p5"};
    auto with_ids = pv.without_ties();
    CHECK(with_ids.pair_ids == std::vector<std::string>{"p0", "p4", "p5"});
}

TEST_CASE("agreement is invariant under consistent category relabeling") {
    auto pv = from_table({{20, 7, 3}, {5, 25, 4}, {2, 6, 28}});
    // Swap the win categories for both judges at once.
    PairedVerdicts swapped = pv;
    auto flip = [](Category c) {
        if (c == Category::MethodXWins) return Category::MethodYWins;
        if (c == Category::MethodYWins) return Category::MethodXWins;
        return Category::Tie;
    };
    for (auto& c : swapped.judge1) c = flip(c);
    for (auto& c : swapped.judge2) c = flip(c);

    CHECK(raw_agreement(pv) == raw_agreement(swapped));
    CHECK_THAT(cohens_kappa(pv), Catch::Matchers::WithinAbs(cohens_kappa(swapped), 1e-12));
    CHECK_THAT(gwet_ac1(pv), Catch::Matchers::WithinAbs(gwet_ac1(swapped), 1e-12));
}

TEST_CASE("independent judges land near zero kappa") {
    Rng rng(2024);
    PairedVerdicts pv;
    for (int i = 0; i < 2000; ++i) {
        pv.judge1.push_back(static_cast<Category>(rng.uniform_below(3)));
        pv.judge2.push_back(static_cast<Category>(rng.uniform_below(3)));
    }
    CHECK_THAT(cohens_kappa(pv), Catch::Matchers::WithinAbs(0.0, 0.06));
    CHECK_THAT(gwet_ac1(pv), Catch::Matchers::WithinAbs(0.0, 0.06));
}

TEST_CASE("degenerate and undersized inputs raise typed errors") {
    // Both judges constant on the same category: chance agreement is 1.
    auto constant = from_table({{50}});
    try {
        cohens_kappa(constant);
        FAIL("expected degenerate-agreement error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateAgreement);
    }
    CHECK_THROWS_AS(gwet_ac1(constant), Error);

    // Constant but on different categories is fine (kappa 0 or negative).
    PairedVerdicts off;
    for (int i = 0; i < 10; ++i) {
        off.judge1.push_back(Category::MethodXWins);
        off.judge2.push_back(Category::MethodYWins);
    }
    CHECK_NOTHROW(cohens_kappa(off));

    PairedVerdicts tiny;
    tiny.judge1.push_back(Category::MethodXWins);
    tiny.judge2.push_back(Category::MethodXWins);
    CHECK_THROWS_AS(cohens_kappa(tiny), Error);
    CHECK_THROWS_AS(gwet_ac1(tiny), Error);
    CHECK_NOTHROW(raw_agreement(tiny));

    PairedVerdicts empty;
    CHECK_THROWS_AS(raw_agreement(empty), Error);

    // Ties can push the binary view below the minimum.
    PairedVerdicts tied;
    for (int i = 0; i < 5; ++i) {
        tied.judge1.push_back(Category::Tie);
        tied.judge2.push_back(i % 2 ? Category::MethodXWins : Category::MethodYWins);
    }
    tied.judge1.push_back(Category::MethodXWins);
    tied.judge2.push_back(Category::MethodXWins);
    CHECK_THROWS_AS(cohens_kappa(tied, true), Error);

    PairedVerdicts misaligned;
    misaligned.judge1.push_back(Category::MethodXWins);
    CHECK_THROWS_AS(misaligned.validate(), Error);

    PairedVerdicts bad_ids = from_table({{3, 1}, {1, 3}});
    bad_ids.pair_ids = {"only_one"};
    CHECK_THROWS_AS(bad_ids.validate(), Error);
}
