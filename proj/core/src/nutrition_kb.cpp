#include "caloraify/nutrition_kb.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "caloraify/digest.hpp"
#include "caloraify/error.hpp"
#include "caloraify/json_codec.hpp"
#include "caloraify/text.hpp"

namespace caloraify::kb {

namespace {

constexpr std::array<std::string_view, 9> kColumns = {
    "food_id", "name", "category", "kcal_per_100g", "protein_g",
    "fat_g", "carb_g", "density_g_per_ml", "portion_weights"};

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
std::vector<CsvRow> read_csv(std::string_view data) {
    std::vector<CsvRow> rows;
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < data.size()) {
        CsvRow row;
        row.line = line;
        std::string field;
        bool in_quotes = false;
        bool row_done = false;
        while (i < data.size() && !row_done) {
            char c = data[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < data.size() && data[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    in_quotes = false;
                } else {
                    if (c == '\n') ++line;
                    field.push_back(c);
                }
                ++i;
                continue;
            }
            switch (c) {
                case '"':
                    in_quotes = true;
                    break;
                case ',':
                    row.fields.push_back(std::move(field));
                    field.clear();
                    break;
                case '\r':
                    break;
                case '\n':
                    ++line;
                    row_done = true;
                    break;
                default:
                    field.push_back(c);
            }
            ++i;
        }
        if (in_quotes) throw IngestError("unterminated quoted field", row.line);
        row.fields.push_back(std::move(field));
        bool blank = row.fields.size() == 1 && text::trim(row.fields[0]).empty();
        if (!blank) rows.push_back(std::move(row));
    }
    return rows;
}

double parse_non_negative(std::string_view raw, std::string_view column, std::size_t line) {
    double v = 0.0;
    if (!text::parse_double(text::trim(raw), v)) {
        throw IngestError("column " + std::string(column) + ": not a number: '" + std::string(raw) + "'", line);
    }
    if (v < 0.0) {
        throw IngestError("column " + std::string(column) + ": negative value " + text::format_double(v), line);
    }
    return v;
}

std::optional<double> parse_optional_non_negative(std::string_view raw, std::string_view column, std::size_t line) {
    if (text::trim(raw).empty()) return std::nullopt;
    return parse_non_negative(raw, column, line);
}

std::map<std::string, double> parse_portions(std::string_view raw, std::size_t line) {
    std::map<std::string, double> out;
    raw = text::trim(raw);
    if (raw.empty()) return out;
    std::size_t start = 0;
    while (start <= raw.size()) {
        std::size_t end = raw.find(';', start);
        if (end == std::string_view::npos) end = raw.size();
        std::string_view entry = text::trim(raw.substr(start, end - start));
        start = end + 1;
        if (entry.empty()) {
            if (end == raw.size()) break;  // tolerate a trailing ';'
            throw IngestError("malformed portion_weights: empty entry", line);
        }
        std::size_t colon = entry.rfind(':');
        if (colon == std::string_view::npos) {
            throw IngestError("malformed portion_weights entry '" + std::string(entry) + "': expected name:grams", line);
        }
        std::string name = text::normalize_name(entry.substr(0, colon));
        double grams = 0.0;
        if (name.empty() || !text::parse_double(text::trim(entry.substr(colon + 1)), grams)) {
            throw IngestError("malformed portion_weights entry '" + std::string(entry) + "'", line);
        }
        if (!(grams > 0.0)) {
            throw IngestError("portion '" + name + "' must weigh more than 0 g", line);
        }
        if (!out.emplace(name, grams).second) {
            throw IngestError("duplicate portion name '" + name + "'", line);
        }
    }
    return out;
}

void check_invariants(const FoodRecord& r, std::size_t line) {
    auto check = [&](double v, std::string_view what) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw IngestError(std::string(what) + " must be a finite non-negative number for '" + r.food_id + "'", line);
        }
    };
    if (r.food_id.empty()) throw IngestError("empty food_id", line);
    check(r.kcal_per_100g, "kcal_per_100g");
    for (const auto* macro : {&r.protein_g, &r.fat_g, &r.carb_g}) {
        if (*macro) check(**macro, "macro nutrient");
    }
    if (r.density_g_per_ml && !(*r.density_g_per_ml > 0.0)) {
        throw IngestError("density_g_per_ml must be > 0 for '" + r.food_id + "'", line);
    }
    for (const auto& [name, grams] : r.portion_weights) {
        if (!(grams > 0.0)) throw IngestError("portion '" + name + "' must weigh more than 0 g", line);
    }
}

std::string slurp(std::istream& in) {
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

double atwater_kcal(const FoodRecord& r) {
    return 4.0 * r.protein_g.value_or(0.0) + 9.0 * r.fat_g.value_or(0.0) + 4.0 * r.carb_g.value_or(0.0);
}

std::optional<double> atwater_deviation(const FoodRecord& r) {
    if (!r.protein_g || !r.fat_g || !r.carb_g) return std::nullopt;
    double estimate = atwater_kcal(r);
    double diff = std::abs(estimate - r.kcal_per_100g);
    if (r.kcal_per_100g == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / r.kcal_per_100g;
}

KnowledgeBase::KnowledgeBase(std::vector<FoodRecord> records, std::string source_digest)
    : records_(std::move(records)), source_digest_(std::move(source_digest)) {
    by_id_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const FoodRecord& r = records_[i];
        check_invariants(r, 0);
        if (!by_id_.emplace(r.food_id, i).second) {
            throw IngestError("duplicate food_id '" + r.food_id + "'");
        }
        if (auto dev = atwater_deviation(r); dev && *dev > kAtwaterTolerance) {
            warnings_.push_back({r.food_id, atwater_kcal(r), r.kcal_per_100g, *dev});
        }
    }
}

const FoodRecord* KnowledgeBase::find(std::string_view food_id) const {
    auto it = by_id_.find(std::string(food_id));
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

KnowledgeBase ingest_csv(std::istream& in) {
    const std::string data = slurp(in);
    std::vector<CsvRow> rows = read_csv(data);
    if (rows.empty()) throw IngestError("missing header row");

    const CsvRow& header = rows.front();
    bool header_ok = header.fields.size() == kColumns.size();
    for (std::size_t c = 0; header_ok && c < kColumns.size(); ++c) {
        header_ok = text::iequals(text::trim(header.fields[c]), kColumns[c]);
    }
    if (!header_ok) {
        throw IngestError("header must be food_id,name,category,kcal_per_100g,protein_g,fat_g,carb_g,density_g_per_ml,portion_weights", header.line);
    }

    std::vector<FoodRecord> records;
    records.reserve(rows.size() - 1);
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& row = rows[r];
        if (row.fields.size() != kColumns.size()) {
            throw IngestError("expected 9 fields, found " + std::to_string(row.fields.size()), row.line);
        }
        const auto& f = row.fields;
        FoodRecord rec;
        rec.food_id = std::string(text::trim(f[0]));
        rec.name = std::string(text::trim(f[1]));
        rec.category = std::string(text::trim(f[2]));
        if (rec.food_id.empty()) throw IngestError("empty food_id", row.line);
        if (auto [it, inserted] = seen.emplace(rec.food_id, row.line); !inserted) {
            throw IngestError("duplicate food_id '" + rec.food_id + "' (first seen on line " + std::to_string(it->second) + ")", row.line);
        }
        rec.kcal_per_100g = parse_non_negative(f[3], kColumns[3], row.line);
        rec.protein_g = parse_optional_non_negative(f[4], kColumns[4], row.line);
        rec.fat_g = parse_optional_non_negative(f[5], kColumns[5], row.line);
        rec.carb_g = parse_optional_non_negative(f[6], kColumns[6], row.line);
        if (auto d = parse_optional_non_negative(f[7], kColumns[7], row.line)) {
            if (*d == 0.0) throw IngestError("density_g_per_ml must be > 0", row.line);
            rec.density_g_per_ml = d;
        }
        rec.portion_weights = parse_portions(f[8], row.line);
        records.push_back(std::move(rec));
    }
    return KnowledgeBase(std::move(records), sha256_hex(data));
}

KnowledgeBase ingest_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return ingest_csv(in);
}

void write_snapshot(const KnowledgeBase& kb, std::ostream& out) {
    for (const auto& r : kb.records()) {
        out << nlohmann::json(r).dump() << '\n';
    }
}

KnowledgeBase load_snapshot(std::istream& in) {
    const std::string data = slurp(in);
    std::vector<FoodRecord> records;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(data)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line).get<FoodRecord>());
        } catch (const nlohmann::json::exception& e) {
            throw IngestError(std::string("bad snapshot record: ") + e.what(), line_no);
        }
    }
    return KnowledgeBase(std::move(records), sha256_hex(data));
}

KnowledgeBase load_file(const std::string& path) {
    if (path.size() >= 4 && text::iequals(std::string_view(path).substr(path.size() - 4), ".csv")) {
        return ingest_csv_file(path);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return load_snapshot(in);
}

std::optional<FoodRecord> lookup(const KnowledgeBase& kb, std::string_view food_id) {
    if (const FoodRecord* r = kb.find(food_id)) return *r;
    return std::nullopt;
}

std::optional<double> resolve_portion(const FoodRecord& record, std::string_view portion_name) {
    auto it = record.portion_weights.find(text::normalize_name(portion_name));
    if (it == record.portion_weights.end()) return std::nullopt;
    return it->second;
}

KbStats stats(const KnowledgeBase& kb) {
    KbStats s;
    s.record_count = kb.record_count();
    s.source_digest = kb.source_digest();
    s.atwater_flagged = kb.warnings().size();
    std::set<std::string> categories;
    for (const auto& r : kb.records()) {
        categories.insert(r.category);
        if (r.density_g_per_ml) ++s.with_density;
        if (!r.portion_weights.empty()) ++s.with_portions;
    }
    s.category_count = categories.size();
    return s;
}

}  // namespace caloraify::kb
