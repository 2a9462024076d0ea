#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "caloraify/error.hpp"
#include "caloraify/nutrition_kb.hpp"

using namespace caloraify;

namespace {

const std::string kHeader = "food_id,name,category,kcal_per_100g,protein_g,fat_g,carb_g,density_g_per_ml,portion_weights\n";

kb::KnowledgeBase ingest(const std::string& body) {
    std::istringstream in(kHeader + body);
    return kb::ingest_csv(in);
}

std::string ingest_error(const std::string& body) {
    try {
        ingest(body);
    } catch (const IngestError& e) {
        return e.what();
    }
    return "no error";
}

}  // namespace

TEST_CASE("fixture knowledge base loads") {
    const auto kb = kb::ingest_csv_file(std::string(CALORAIFY_FIXTURE_DIR) + "/kb_fixture.csv");
    CHECK(kb.record_count() == 12);
    const auto* egg = kb.find("egg-01");
    REQUIRE(egg);
    CHECK(egg->name == "Eggs, whole");
    CHECK_FALSE(egg->density_g_per_ml.has_value());
    CHECK(kb::resolve_portion(*egg, "  PIECE ") == 50.0);
    CHECK_FALSE(kb::resolve_portion(*egg, "cup"));
    CHECK(kb.find("nope") == nullptr);
    CHECK_FALSE(kb::lookup(kb, "nope"));
    CHECK(kb.source_digest().size() == 64);

    const auto st = kb::stats(kb);
    CHECK(st.record_count == 12);
    CHECK(st.with_portions == 12);
}

TEST_CASE("optional macros and quoted fields") {
    const auto kb = ingest("x1,\"Name, with \"\"quote\"\"\",Cat,100,,,,,\n");
    const auto* r = kb.find("x1");
    REQUIRE(r);
    CHECK(r->name == "Name, with \"quote\"");
    CHECK_FALSE(r->protein_g);
    CHECK(r->portion_weights.empty());
    CHECK_FALSE(kb::atwater_deviation(*r));
}

TEST_CASE("atwater warnings") {
    // 4*10 + 9*10 + 4*10 = 170 vs stated 100 -> 70% off
    const auto kb = ingest("a,A,C,100,10,10,10,,\nb,B,C,170,10,10,10,,\n");
    REQUIRE(kb.warnings().size() == 1);
    CHECK(kb.warnings()[0].food_id == "a");
    CHECK(kb.warnings()[0].relative_deviation == doctest::Approx(0.7));
}

TEST_CASE("strict ingestion errors cite lines") {
    CHECK(ingest_error("a,A,C,100,,,,,\na,B,C,100,,,,,\n") == "line 3: duplicate food_id 'a' (first seen on line 2)");
    CHECK(ingest_error("a,A,C,-1,,,,,\n").find("line 2: column kcal_per_100g: negative value") == 0);
    CHECK(ingest_error("a,A,C,abc,,,,,\n").find("not a number") != std::string::npos);
    CHECK(ingest_error("a,A,C,1,,,,,cup\n").find("expected name:grams") != std::string::npos);
    CHECK(ingest_error("a,A,C,1,,,,0,\n").find("density_g_per_ml must be > 0") != std::string::npos);
    CHECK(ingest_error("a,A,C,1,,,,\n").find("expected 9 fields") != std::string::npos);
    CHECK(ingest_error("a,\"A,C,1,,,,,\n").find("unterminated") != std::string::npos);

    std::istringstream bad_header("id,name\n");
    CHECK_THROWS_AS(kb::ingest_csv(bad_header), IngestError);
}

TEST_CASE("snapshot round-trip preserves records and bytes") {
    const auto kb = kb::ingest_csv_file(std::string(CALORAIFY_FIXTURE_DIR) + "/kb_fixture.csv");
    std::stringstream buf;
    kb::write_snapshot(kb, buf);
    const auto back = kb::load_snapshot(buf);
    CHECK(back.records() == kb.records());
    std::stringstream again;
    kb::write_snapshot(back, again);
    CHECK(again.str() == buf.str());
}

TEST_CASE("missing file") { CHECK_THROWS_AS(kb::load_file("/nonexistent/x.csv"), InputError); }
