#include <doctest.h>

#include <algorithm>
#include <random>

#include "caloraify/calorie_engine.hpp"
#include "caloraify/error.hpp"

using namespace caloraify;

namespace {

struct Fixture {
    kb::KnowledgeBase kb = kb::ingest_csv_file(std::string(CALORAIFY_FIXTURE_DIR) + "/kb_fixture.csv");
    std::unique_ptr<retrieval::VectorIndex> index =
        retrieval::build_index(kb, std::make_shared<retrieval::HashingEmbedder>());
};

std::vector<parser::ParsedIngredient> parse_all(std::initializer_list<std::string_view> lines) {
    std::vector<parser::ParsedIngredient> out;
    for (auto l : lines) out.push_back(parser::parse_line(l));
    return out;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "fixture dish totals 820 kcal") {
    const auto items = parse_all({"2 cups flour", "3 eggs"});
    const auto report = engine::estimate(items, *index, kb);
    REQUIRE(report.estimates.size() == 2);
    CHECK(report.estimates[0].matched_food_id == "flour-01");
    CHECK(report.estimates[0].grams == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(report.estimates[0].kcal == doctest::Approx(700.0).epsilon(1e-12));
    CHECK(report.estimates[1].matched_food_id == "egg-01");
    CHECK(report.estimates[1].grams == 150.0);
    CHECK(report.estimates[1].kcal == 120.0);
    CHECK(report.estimates[0].flags.empty());
    CHECK(report.total_kcal == doctest::Approx(820.0).epsilon(1e-12));
    CHECK(report.evidence.size() == 2);
    CHECK(report.generated_answer == "flour — 200.0 g — 700 kcal\neggs — 150.0 g — 120 kcal\nTOTAL: 820 kcal");
}

TEST_CASE_FIXTURE(Fixture, "unmatched items are flagged and contribute nothing") {
    const auto report = engine::estimate(parse_all({"100 g zzqx", "1 tbsp olive oil"}), *index, kb);
    CHECK_FALSE(report.estimates[0].matched_food_id);
    CHECK(report.estimates[0].flags.has(engine::Flag::no_match));
    CHECK(report.estimates[0].kcal == 0.0);
    CHECK(report.estimates[1].matched_food_id == "oil-01");
    CHECK(report.total_kcal == doctest::Approx(14.78676478125 * 0.918 * 8.84));
    CHECK(report.generated_answer.find("[no_match]") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "low confidence band") {
    engine::EstimateConfig cfg;
    const auto m = engine::match_ingredient(parser::parse_line("eggs"), *index, kb, cfg);
    REQUIRE(m.record);
    cfg.min_score = m.score + 0.01;  // just above the hit, still inside the 0.8 band
    const auto weak = engine::match_ingredient(parser::parse_line("eggs"), *index, kb, cfg);
    CHECK(weak.record);
    CHECK(weak.low_confidence);
    cfg.min_score = m.score / 0.7;
    CHECK(engine::match_ingredient(parser::parse_line("eggs"), *index, kb, cfg).record == nullptr);
}

TEST_CASE_FIXTURE(Fixture, "homogeneity, additivity and permutation") {
    std::mt19937_64 rng(41);
    const std::vector<std::string> names = {"flour", "eggs", "butter", "sugar", "milk", "olive oil",
                                            "rice", "chicken breast", "banana", "tomatoes", "garlic", "salt"};
    const std::vector<std::string> units = {"g", "cup", "tbsp", "piece", "oz", "ml"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<parser::ParsedIngredient> items;
        for (int i = 0; i < 1 + static_cast<int>(rng() % 6); ++i) {
            items.push_back(parser::parse_line(std::to_string(1 + rng() % 9) + " " + units[rng() % units.size()] + " " +
                                               names[rng() % names.size()]));
        }
        const auto base = engine::estimate(items, *index, kb);
        double sum = 0.0;
        for (const auto& e : base.estimates) sum += e.kcal;
        CHECK(base.total_kcal == sum);

        // scaling every quantity scales each contribution
        const double s = 2.5;
        auto scaled = items;
        for (auto& it : scaled) it.quantity *= s;
        const auto big = engine::estimate(scaled, *index, kb);
        for (std::size_t i = 0; i < items.size(); ++i) {
            CHECK(big.estimates[i].kcal == doctest::Approx(s * base.estimates[i].kcal).epsilon(1e-12));
        }

        auto shuffled = items;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(engine::estimate(shuffled, *index, kb).total_kcal == doctest::Approx(base.total_kcal).epsilon(1e-12));
    }
}

TEST_CASE("rounding is half-up") {
    CHECK(engine::round_half_up(0.5) == 1);
    CHECK(engine::round_half_up(1.49) == 1);
    CHECK(engine::round_half_up(2.5) == 3);
    CHECK(engine::round_half_up(-0.5) == 0);
}
