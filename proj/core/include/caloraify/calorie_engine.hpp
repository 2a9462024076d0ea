#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caloraify/ingredient_parser.hpp"
#include "caloraify/nutrition_kb.hpp"
#include "caloraify/retrieval.hpp"

namespace caloraify::engine {

enum class Flag { assumed_density, no_match, low_confidence };

std::string_view to_string(Flag flag);

/// Small ordered flag set; iteration follows the enum order.
class Flags {
public:
    void set(Flag f) { bits_ |= mask(f); }
    bool has(Flag f) const { return (bits_ & mask(f)) != 0; }
    bool empty() const { return bits_ == 0; }
    std::vector<Flag> list() const;

    bool operator==(const Flags&) const = default;

private:
    static unsigned mask(Flag f) { return 1u << static_cast<unsigned>(f); }
    unsigned bits_ = 0;
};

struct EstimateConfig {
    std::size_t k = 3;
    double min_score = 0.35;
    /// Hits in (low_confidence_ratio·min_score, min_score) still match, flagged low_confidence.
    double low_confidence_ratio = 0.8;
};

struct MatchResult {
    const kb::FoodRecord* record = nullptr;
    double score = 0.0;
    bool low_confidence = false;
    retrieval::RetrievedContext context;
};

/// Searches the index with the ingredient name and applies the score bands of `config`.
MatchResult match_ingredient(const parser::ParsedIngredient& item, const retrieval::VectorIndex& index,
                             const kb::KnowledgeBase& kb, const EstimateConfig& config);

struct IngredientEstimate {
    parser::ParsedIngredient ingredient;
    std::optional<std::string> matched_food_id;
    double grams = 0.0;
    double kcal = 0.0;
    double match_score = 0.0;
    Flags flags;

    bool operator==(const IngredientEstimate&) const = default;
};

struct CalorieReport {
    std::vector<IngredientEstimate> estimates;
    double total_kcal = 0.0;
    std::vector<retrieval::RetrievedContext> evidence;
    std::string generated_answer;

    bool operator==(const CalorieReport&) const = default;
};

/// Matches, converts and sums each item in order. Unmatched items contribute 0 kcal.
CalorieReport estimate(std::span<const parser::ParsedIngredient> items, const retrieval::VectorIndex& index,
                       const kb::KnowledgeBase& kb, const EstimateConfig& config = {});

/// Half-up rounding to an integer, used only when rendering.
long long round_half_up(double v);

/// One line per ingredient, `name — grams g — kcal kcal — [flag] ...`, then `TOTAL: N kcal`.
std::string render_answer(const CalorieReport& report);

}  // namespace caloraify::engine
