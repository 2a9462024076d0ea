#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caloraify/nutrition_kb.hpp"

namespace caloraify::parser {

enum class UnitKind { mass, volume, count };

std::string_view to_string(UnitKind kind);

/// A measurement unit. `to_base` is grams per unit (mass), milliliters per unit (volume) or 1 (count).
struct Unit {
    UnitKind kind = UnitKind::count;
    std::string name;
    double to_base = 1.0;

    bool operator==(const Unit&) const = default;
};

/// US legal definitions.
namespace constants {
inline constexpr double kTspMl = 4.92892159375;
inline constexpr double kTbspMl = 14.78676478125;
inline constexpr double kCupMl = 236.5882365;
inline constexpr double kFlOzMl = 29.5735295625;
inline constexpr double kOzG = 28.349523125;
inline constexpr double kLbG = 453.59237;
inline constexpr double kDefaultPieceGrams = 100.0;
inline constexpr double kDefaultDensity = 1.0;
}  // namespace constants

/// Canonical units in table order.
std::span<const Unit> unit_table();
/// Looks up a canonical name or alias, case-insensitively. Multi-word aliases ("fl oz") are accepted.
std::optional<Unit> find_unit(std::string_view alias);
const Unit& piece_unit();

struct ParsedIngredient {
    std::string name;
    double quantity = 1.0;
    Unit unit;
    std::string raw_line;

    bool operator==(const ParsedIngredient&) const = default;
};

/// Grammar: `quantity unit name | quantity name | name`.
/// Quantities: integer, decimal, `a/b`, mixed `i a/b`, or a vulgar fraction (½ ¼ ¾ ⅓ ⅔), optionally
/// glued to an integer (`1½`). A bare name gets quantity 1 and unit `piece`. After a unit a single
/// leading "of" is dropped ("2 cups of flour"). A token that does not read as a quantity becomes part
/// of the name. Throws ParseError on an empty line, a non-positive quantity, or a name without letters
/// or digits.
ParsedIngredient parse_line(std::string_view line);

/// Renders an item in the canonical `quantity unit name` form that parse_line reads back.
std::string format_ingredient(const ParsedIngredient& item);

struct LineError {
    std::size_t line = 0;  ///< 1-based line within the block
    std::string text;
    std::string message;
};

struct BlockParse {
    std::vector<ParsedIngredient> items;
    std::vector<LineError> errors;
};

/// Parses a multi-line answer, stripping list markers (`-`, `*`, `•`, `1.`, `1)`). Never throws on
/// bad lines; each failure is recorded in `errors`.
BlockParse parse_block(std::string_view text);

/// Converts a quantity between two units of the same kind. Throws ArgumentError across kinds.
double convert(double quantity, const Unit& from, const Unit& to);

struct GramsEstimate {
    double grams = 0.0;
    bool assumed_density = false;
};

/// Mass of a parsed item. Volume uses the record density (1.0 g/ml assumed when absent). Count units
/// look up the record portion named after the unit, then "piece", then "unit", then fall back to
/// 100 g per piece. Any fallback sets `assumed_density`.
GramsEstimate to_grams(const ParsedIngredient& item, const kb::FoodRecord* record);

}  // namespace caloraify::parser
