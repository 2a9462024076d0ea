#include "caloraify/ingredient_parser.hpp"

#include <array>
#include <cmath>

#include "caloraify/error.hpp"
#include "caloraify/text.hpp"

namespace caloraify::parser {

namespace {

using namespace constants;

struct UnitEntry {
    Unit unit;
    std::vector<std::string_view> aliases;
};

const std::vector<UnitEntry>& entries() {
    static const std::vector<UnitEntry> table = {
        {{UnitKind::mass, "g", 1.0}, {"g", "gram", "grams", "gr"}},
        {{UnitKind::mass, "mg", 0.001}, {"mg", "milligram", "milligrams"}},
        {{UnitKind::mass, "kg", 1000.0}, {"kg", "kilogram", "kilograms", "kilo", "kilos"}},
        {{UnitKind::mass, "oz", kOzG}, {"oz", "ounce", "ounces"}},
        {{UnitKind::mass, "lb", kLbG}, {"lb", "lbs", "pound", "pounds"}},
        {{UnitKind::volume, "ml", 1.0}, {"ml", "milliliter", "milliliters", "millilitre", "millilitres"}},
        {{UnitKind::volume, "l", 1000.0}, {"l", "liter", "liters", "litre", "litres"}},
        {{UnitKind::volume, "tsp", kTspMl}, {"tsp", "tsps", "teaspoon", "teaspoons"}},
        {{UnitKind::volume, "tbsp", kTbspMl}, {"tbsp", "tbsps", "tbs", "tablespoon", "tablespoons"}},
        {{UnitKind::volume, "cup", kCupMl}, {"cup", "cups"}},
        {{UnitKind::volume, "fl oz", kFlOzMl}, {"fl oz", "floz", "fl. oz", "fluid ounce", "fluid ounces"}},
        {{UnitKind::count, "piece", 1.0}, {"piece", "pieces", "pc", "pcs"}},
        {{UnitKind::count, "slice", 1.0}, {"slice", "slices"}},
        {{UnitKind::count, "clove", 1.0}, {"clove", "cloves"}},
    };
    return table;
}

const std::vector<Unit>& units() {
    static const std::vector<Unit> list = [] {
        std::vector<Unit> out;
        for (const auto& e : entries()) out.push_back(e.unit);
        return out;
    }();
    return list;
}

struct Vulgar {
    std::string_view utf8;
    double value;
};

constexpr std::array<Vulgar, 5> kVulgar = {{
    {"\xC2\xBD", 1.0 / 2.0},
    {"\xC2\xBC", 1.0 / 4.0},
    {"\xC2\xBE", 3.0 / 4.0},
    {"\xE2\x85\x93", 1.0 / 3.0},
    {"\xE2\x85\x94", 2.0 / 3.0},
}};

std::optional<double> parse_vulgar(std::string_view t) {
    for (const auto& v : kVulgar) {
        if (t == v.utf8) return v.value;
    }
    return std::nullopt;
}

bool is_digits(std::string_view t) {
    if (t.empty()) return false;
    for (char c : t) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

std::optional<double> parse_slash_fraction(std::string_view t) {
    std::size_t slash = t.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    std::string_view num = t.substr(0, slash);
    std::string_view den = t.substr(slash + 1);
    if (!is_digits(num) || !is_digits(den)) return std::nullopt;
    double n = 0.0, d = 0.0;
    if (!text::parse_double(num, n) || !text::parse_double(den, d) || d == 0.0) return std::nullopt;
    return n / d;
}

std::optional<double> parse_fraction(std::string_view t) {
    if (auto v = parse_vulgar(t)) return v;
    return parse_slash_fraction(t);
}

// A single quantity token: decimal, a/b, vulgar, or integer glued to a vulgar ("1½").
std::optional<double> parse_quantity_token(std::string_view t) {
    if (auto f = parse_fraction(t)) return f;
    double v = 0.0;
    if (text::parse_double(t, v)) return v;
    std::size_t digits = 0;
    while (digits < t.size() && t[digits] >= '0' && t[digits] <= '9') ++digits;
    if (digits > 0 && digits < t.size()) {
        if (auto frac = parse_vulgar(t.substr(digits))) {
            double whole = 0.0;
            text::parse_double(t.substr(0, digits), whole);
            return whole + *frac;
        }
    }
    return std::nullopt;
}

std::string_view strip_trailing_period(std::string_view t) {
    if (t.size() > 1 && t.back() == '.') t.remove_suffix(1);
    return t;
}

std::string join(std::span<const std::string_view> tokens) {
    std::string out;
    for (auto t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out.append(t);
    }
    return out;
}

std::string clean_name(std::span<const std::string_view> tokens) {
    std::string name = text::normalize_name(join(tokens));
    while (!name.empty() && (name.back() == ',' || name.back() == '.' || name.back() == ';' || name.back() == ':')) {
        name.pop_back();
    }
    return std::string(text::trim(name));
}

// Strips one leading list marker; returns nullopt when the line holds nothing but a marker.
std::string_view strip_marker(std::string_view line, bool& had_marker) {
    had_marker = false;
    auto followed_by_space = [&](std::size_t pos) {
        return pos >= line.size() || line[pos] == ' ' || line[pos] == '\t';
    };
    if ((line.starts_with('-') || line.starts_with('*')) && followed_by_space(1)) {
        had_marker = true;
        return text::trim(line.substr(1));
    }
    constexpr std::string_view kBullet = "\xE2\x80\xA2";
    if (line.starts_with(kBullet) && followed_by_space(kBullet.size())) {
        had_marker = true;
        return text::trim(line.substr(kBullet.size()));
    }
    std::size_t digits = 0;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')') &&
        followed_by_space(digits + 1)) {
        had_marker = true;
        return text::trim(line.substr(digits + 1));
    }
    return line;
}

}  // namespace

std::string_view to_string(UnitKind kind) {
    switch (kind) {
        case UnitKind::mass: return "mass";
        case UnitKind::volume: return "volume";
        case UnitKind::count: return "count";
    }
    return "count";
}

std::span<const Unit> unit_table() { return units(); }

std::optional<Unit> find_unit(std::string_view alias) {
    std::string key = text::normalize_name(alias);
    for (const auto& e : entries()) {
        for (auto a : e.aliases) {
            if (key == a) return e.unit;
        }
    }
    return std::nullopt;
}

const Unit& piece_unit() {
    static const Unit piece = *find_unit("piece");
    return piece;
}

ParsedIngredient parse_line(std::string_view line) {
    const std::string_view trimmed = text::trim(line);
    if (trimmed.empty()) throw ParseError("empty ingredient line");

    const std::vector<std::string_view> tokens = text::split_whitespace(trimmed);
    ParsedIngredient item;
    item.raw_line = std::string(line);
    item.unit = piece_unit();

    std::size_t pos = 0;
    std::optional<double> quantity;
    if (tokens.size() >= 2 && is_digits(tokens[0])) {
        if (auto frac = parse_fraction(tokens[1])) {
            double whole = 0.0;
            text::parse_double(tokens[0], whole);
            quantity = whole + *frac;
            pos = 2;
        }
    }
    if (!quantity) {
        if ((quantity = parse_quantity_token(tokens[0]))) pos = 1;
    }

    if (quantity) {
        if (!(*quantity > 0.0)) throw ParseError("quantity must be positive in '" + std::string(trimmed) + "'");
        item.quantity = *quantity;
        std::size_t unit_len = 0;
        if (pos + 1 < tokens.size()) {
            std::string two = std::string(tokens[pos]) + " " + std::string(strip_trailing_period(tokens[pos + 1]));
            if (auto u = find_unit(two)) {
                item.unit = *u;
                unit_len = 2;
            }
        }
        if (unit_len == 0 && pos < tokens.size()) {
            if (auto u = find_unit(strip_trailing_period(tokens[pos]))) {
                item.unit = *u;
                unit_len = 1;
            }
        }
        // A unit with nothing after it is really the name ("2 cups").
        if (unit_len > 0 && pos + unit_len < tokens.size()) {
            pos += unit_len;
            if (text::iequals(tokens[pos], "of") && pos + 1 < tokens.size()) ++pos;
        } else if (unit_len > 0) {
            item.unit = piece_unit();
        }
    }

    item.name = clean_name(std::span(tokens).subspan(pos));
    if (item.name.empty()) throw ParseError("missing ingredient name in '" + std::string(trimmed) + "'");
    if (!text::has_alnum(item.name)) throw ParseError("no ingredient name in '" + std::string(trimmed) + "'");
    return item;
}

std::string format_ingredient(const ParsedIngredient& item) {
    std::string out = text::format_double(item.quantity);
    out += ' ';
    out += item.unit.name;
    out += ' ';
    if (item.name == "of" || item.name.starts_with("of ")) out += "of ";
    out += item.name;
    return out;
}

BlockParse parse_block(std::string_view block) {
    BlockParse result;
    std::size_t line_no = 0;
    for (const auto& raw : text::split_lines(block)) {
        ++line_no;
        std::string_view line = text::trim(raw);
        if (line.empty()) continue;
        bool had_marker = false;
        std::string_view body = strip_marker(line, had_marker);
        try {
            if (body.empty()) throw ParseError("empty after list marker");
            ParsedIngredient item = parse_line(body);
            item.raw_line = raw;
            result.items.push_back(std::move(item));
        } catch (const ParseError& e) {
            result.errors.push_back({line_no, raw, e.what()});
        }
    }
    return result;
}

double convert(double quantity, const Unit& from, const Unit& to) {
    if (from.kind != to.kind) {
        throw ArgumentError("cannot convert " + from.name + " (" + std::string(to_string(from.kind)) + ") to " +
                            to.name + " (" + std::string(to_string(to.kind)) + ")");
    }
    return quantity * from.to_base / to.to_base;
}

GramsEstimate to_grams(const ParsedIngredient& item, const kb::FoodRecord* record) {
    switch (item.unit.kind) {
        case UnitKind::mass:
            return {item.quantity * item.unit.to_base, false};
        case UnitKind::volume: {
            double ml = item.quantity * item.unit.to_base;
            if (record && record->density_g_per_ml) return {ml * *record->density_g_per_ml, false};
            return {ml * kDefaultDensity, true};
        }
        case UnitKind::count: {
            if (record) {
                for (std::string_view portion : {std::string_view(item.unit.name), std::string_view("piece"), std::string_view("unit")}) {
                    if (auto grams = kb::resolve_portion(*record, portion)) return {item.quantity * *grams, false};
                }
            }
            return {item.quantity * kDefaultPieceGrams, true};
        }
    }
    return {0.0, true};
}

}  // namespace caloraify::parser
