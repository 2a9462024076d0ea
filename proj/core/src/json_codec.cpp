#include "caloraify/json_codec.hpp"

#include <cmath>

#include "caloraify/error.hpp"
#include "caloraify/text.hpp"

using nlohmann::json;

namespace {

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_double(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

namespace caloraify::kb {

void to_json(json& j, const FoodRecord& r) {
    j = json{
        {"food_id", r.food_id},
        {"name", r.name},
        {"category", r.category},
        {"kcal_per_100g", r.kcal_per_100g},
        {"protein_g", optional_json(r.protein_g)},
        {"fat_g", optional_json(r.fat_g)},
        {"carb_g", optional_json(r.carb_g)},
        {"density_g_per_ml", optional_json(r.density_g_per_ml)},
        {"portion_weights", r.portion_weights},
    };
}

void from_json(const json& j, FoodRecord& r) {
    r.food_id = j.at("food_id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.category = j.value("category", std::string());
    r.kcal_per_100g = j.at("kcal_per_100g").get<double>();
    r.protein_g = optional_double(j, "protein_g");
    r.fat_g = optional_double(j, "fat_g");
    r.carb_g = optional_double(j, "carb_g");
    r.density_g_per_ml = optional_double(j, "density_g_per_ml");
    r.portion_weights.clear();
    if (j.contains("portion_weights") && !j.at("portion_weights").is_null()) {
        for (const auto& [name, grams] : j.at("portion_weights").items()) {
            r.portion_weights[text::normalize_name(name)] = grams.get<double>();
        }
    }
}

void to_json(json& j, const AtwaterWarning& w) {
    j = json{{"food_id", w.food_id},
             {"atwater_kcal", w.atwater_kcal},
             {"stated_kcal", w.stated_kcal},
             {"relative_deviation", std::isfinite(w.relative_deviation) ? json(w.relative_deviation) : json("inf")}};
}

void to_json(json& j, const KbStats& s) {
    j = json{{"record_count", s.record_count},   {"category_count", s.category_count},
             {"with_density", s.with_density},   {"with_portions", s.with_portions},
             {"atwater_flagged", s.atwater_flagged}, {"source_digest", s.source_digest}};
}

}  // namespace caloraify::kb

namespace caloraify::parser {

void to_json(json& j, const Unit& u) {
    j = json{{"kind", to_string(u.kind)}, {"name", u.name}, {"to_base", u.to_base}};
}

void to_json(json& j, const ParsedIngredient& p) {
    j = json{{"name", p.name}, {"quantity", p.quantity}, {"unit", p.unit}, {"raw_line", p.raw_line}};
}

void to_json(json& j, const LineError& e) {
    j = json{{"line", e.line}, {"text", e.text}, {"message", e.message}};
}

void to_json(json& j, const BlockParse& b) {
    j = json{{"items", b.items}, {"errors", b.errors}};
}

}  // namespace caloraify::parser

namespace caloraify::retrieval {

void to_json(json& j, const Hit& h) {
    j = json{{"doc_id", h.doc_id}, {"score", h.score}, {"text", h.text}};
}

void to_json(json& j, const RetrievedContext& c) {
    j = json{{"query_text", c.query_text}, {"hits", c.hits}, {"k_requested", c.k_requested}};
}

}  // namespace caloraify::retrieval

namespace caloraify::engine {

void to_json(json& j, const IngredientEstimate& e) {
    json flags = json::array();
    for (Flag f : e.flags.list()) flags.push_back(to_string(f));
    j = json{{"ingredient", e.ingredient},
             {"matched_food_id", optional_json(e.matched_food_id)},
             {"grams", e.grams},
             {"kcal", e.kcal},
             {"match_score", e.match_score},
             {"flags", flags}};
}

void to_json(json& j, const CalorieReport& r) {
    j = json{{"estimates", r.estimates},
             {"total_kcal", r.total_kcal},
             {"evidence", r.evidence},
             {"generated_answer", r.generated_answer}};
}

}  // namespace caloraify::engine

namespace caloraify::vlm {

void to_json(json& j, const AnalysisResult& a) {
    j = json{{"stage1_text", a.stage1_text}, {"parsed", a.parsed}, {"report", a.report}, {"final_answer", a.final_answer}};
}

}  // namespace caloraify::vlm

namespace caloraify::eval {

void to_json(json& j, const MetricsReport& r) {
    json metrics = json::object();
    for (const auto& m : r.metrics) {
        metrics[m.name] = json{{"value", m.value}, {"scale", m.scale == Scale::unit ? "unit" : "percent"}};
    }
    j = json{{"metrics", metrics},
             {"corpus_size", r.corpus_size},
             {"lambda_rouge", r.spec.lambda_rouge},
             {"lambda_bleu", r.spec.lambda_bleu}};
}

}  // namespace caloraify::eval

namespace caloraify::curate {

void to_json(json& j, const RecipeSample& s) {
    j = json{{"sample_id", s.sample_id},
             {"class_label", s.class_label},
             {"image_ids", s.image_ids},
             {"instructions", s.instructions},
             {"nutrition_text", s.nutrition_text}};
}

void from_json(const json& j, RecipeSample& s) {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.class_label = j.at("class_label").get<std::string>();
    s.image_ids = j.value("image_ids", std::vector<std::string>{});
    s.instructions = j.value("instructions", std::vector<std::string>{});
    s.nutrition_text = j.value("nutrition_text", std::string());
    if (s.sample_id.empty()) throw InputError("sample_id must not be empty");
}

void to_json(json& j, const ManifestEntry& e) {
    j = json{{"pair_id", e.pair.pair_id},
             {"sample_id", e.pair.sample_id},
             {"image_id", e.pair.image_id},
             {"instruction_index", e.pair.instruction_index},
             {"split", to_string(e.split)}};
}

}  // namespace caloraify::curate
