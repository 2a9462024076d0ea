#pragma once

// nlohmann::json conversions for the domain types. Field names match the C++ member names.

#include <nlohmann/json.hpp>

#include "caloraify/caldata_curator.hpp"
#include "caloraify/calorie_engine.hpp"
#include "caloraify/eval_metrics.hpp"
#include "caloraify/ingredient_parser.hpp"
#include "caloraify/nutrition_kb.hpp"
#include "caloraify/retrieval.hpp"
#include "caloraify/vlm_pipeline.hpp"

namespace caloraify::kb {
void to_json(nlohmann::json& j, const FoodRecord& r);
void from_json(const nlohmann::json& j, FoodRecord& r);
void to_json(nlohmann::json& j, const AtwaterWarning& w);
void to_json(nlohmann::json& j, const KbStats& s);
}  // namespace caloraify::kb

namespace caloraify::parser {
void to_json(nlohmann::json& j, const Unit& u);
void to_json(nlohmann::json& j, const ParsedIngredient& p);
void to_json(nlohmann::json& j, const LineError& e);
void to_json(nlohmann::json& j, const BlockParse& b);
}  // namespace caloraify::parser

namespace caloraify::retrieval {
void to_json(nlohmann::json& j, const Hit& h);
void to_json(nlohmann::json& j, const RetrievedContext& c);
}  // namespace caloraify::retrieval

namespace caloraify::engine {
void to_json(nlohmann::json& j, const IngredientEstimate& e);
void to_json(nlohmann::json& j, const CalorieReport& r);
}  // namespace caloraify::engine

namespace caloraify::vlm {
void to_json(nlohmann::json& j, const AnalysisResult& a);
}  // namespace caloraify::vlm

namespace caloraify::eval {
void to_json(nlohmann::json& j, const MetricsReport& r);
}  // namespace caloraify::eval

namespace caloraify::curate {
void to_json(nlohmann::json& j, const RecipeSample& s);
void from_json(const nlohmann::json& j, RecipeSample& s);
void to_json(nlohmann::json& j, const ManifestEntry& e);
}  // namespace caloraify::curate
