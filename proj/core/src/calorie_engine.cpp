#include "caloraify/calorie_engine.hpp"

#include <cmath>

#include "caloraify/text.hpp"

namespace caloraify::engine {

std::string_view to_string(Flag flag) {
    switch (flag) {
        case Flag::assumed_density: return "assumed_density";
        case Flag::no_match: return "no_match";
        case Flag::low_confidence: return "low_confidence";
    }
    return "unknown";
}

std::vector<Flag> Flags::list() const {
    std::vector<Flag> out;
    for (Flag f : {Flag::assumed_density, Flag::no_match, Flag::low_confidence}) {
        if (has(f)) out.push_back(f);
    }
    return out;
}

MatchResult match_ingredient(const parser::ParsedIngredient& item, const retrieval::VectorIndex& index,
                             const kb::KnowledgeBase& kb, const EstimateConfig& config) {
    MatchResult result;
    result.context = index.search(text::trim(item.name), config.k);
    if (result.context.hits.empty()) return result;

    const auto& top = result.context.hits.front();
    result.score = top.score;
    const bool strong = top.score >= config.min_score;
    const bool weak = !strong && top.score > config.min_score * config.low_confidence_ratio;
    if (strong || weak) {
        result.record = kb.find(top.doc_id);
        result.low_confidence = weak && result.record != nullptr;
    }
    return result;
}

CalorieReport estimate(std::span<const parser::ParsedIngredient> items, const retrieval::VectorIndex& index,
                       const kb::KnowledgeBase& kb, const EstimateConfig& config) {
    CalorieReport report;
    report.estimates.reserve(items.size());
    report.evidence.reserve(items.size());
    for (const auto& item : items) {
        MatchResult match = match_ingredient(item, index, kb, config);
        IngredientEstimate est;
        est.ingredient = item;
        est.match_score = match.score;

        const auto grams = parser::to_grams(item, match.record);
        est.grams = grams.grams;
        if (grams.assumed_density) est.flags.set(Flag::assumed_density);

        if (match.record) {
            est.matched_food_id = match.record->food_id;
            est.kcal = est.grams * match.record->kcal_per_100g / 100.0;
            if (match.low_confidence) est.flags.set(Flag::low_confidence);
        } else {
            est.flags.set(Flag::no_match);
        }
        report.total_kcal += est.kcal;
        report.estimates.push_back(std::move(est));
        report.evidence.push_back(std::move(match.context));
    }
    report.generated_answer = render_answer(report);
    return report;
}

long long round_half_up(double v) {
    return static_cast<long long>(std::floor(v + 0.5));
}

std::string render_answer(const CalorieReport& report) {
    std::string out;
    for (const auto& est : report.estimates) {
        out += est.ingredient.name;
        out += " — ";
        out += text::format_fixed(est.grams, 1);
        out += " g — ";
        out += std::to_string(round_half_up(est.kcal));
        out += " kcal";
        if (!est.flags.empty()) {
            out += " —";
            for (Flag f : est.flags.list()) {
                out += " [";
                out += to_string(f);
                out += ']';
            }
        }
        out += '\n';
    }
    out += "TOTAL: " + std::to_string(round_half_up(report.total_kcal)) + " kcal";
    return out;
}

}  // namespace caloraify::engine
