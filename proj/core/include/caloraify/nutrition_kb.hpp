#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace caloraify::kb {

/// One food item. Nutrient values are per 100 g; portion weights are grams per named serving.
/// Portion names are stored lowercased and trimmed.
struct FoodRecord {
    std::string food_id;
    std::string name;
    std::string category;
    double kcal_per_100g = 0.0;
    std::optional<double> protein_g;
    std::optional<double> fat_g;
    std::optional<double> carb_g;
    std::optional<double> density_g_per_ml;
    std::map<std::string, double> portion_weights;

    bool operator==(const FoodRecord&) const = default;
};

/// Record whose Atwater estimate (4·protein + 9·fat + 4·carb) deviates from the stated energy.
struct AtwaterWarning {
    std::string food_id;
    double atwater_kcal = 0.0;
    double stated_kcal = 0.0;
    double relative_deviation = 0.0;
};

inline constexpr double kAtwaterTolerance = 0.25;

double atwater_kcal(const FoodRecord& record);
/// |atwater − stated| / stated, or nullopt when any macro is missing.
/// A zero stated value with a nonzero estimate yields +infinity.
std::optional<double> atwater_deviation(const FoodRecord& record);

/// Immutable, ordered collection of food records with id lookup.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    /// Throws IngestError on a duplicate id or an invariant violation.
    KnowledgeBase(std::vector<FoodRecord> records, std::string source_digest);

    const std::vector<FoodRecord>& records() const noexcept { return records_; }
    std::size_t record_count() const noexcept { return records_.size(); }
    const std::string& source_digest() const noexcept { return source_digest_; }
    const std::vector<AtwaterWarning>& warnings() const noexcept { return warnings_; }

    /// Null when the id was never ingested.
    const FoodRecord* find(std::string_view food_id) const;

private:
    std::vector<FoodRecord> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::string source_digest_;
    std::vector<AtwaterWarning> warnings_;
};

/// Reads the 9-column CSV:
/// food_id,name,category,kcal_per_100g,protein_g,fat_g,carb_g,density_g_per_ml,portion_weights
/// with portion_weights encoded `name:grams;name:grams`. Quoted fields follow RFC 4180.
KnowledgeBase ingest_csv(std::istream& in);
KnowledgeBase ingest_csv_file(const std::string& path);

/// Snapshot: one JSON object per line, field names as in FoodRecord.
void write_snapshot(const KnowledgeBase& kb, std::ostream& out);
KnowledgeBase load_snapshot(std::istream& in);
/// Loads `path` as CSV when it ends in ".csv", otherwise as a snapshot.
KnowledgeBase load_file(const std::string& path);

std::optional<FoodRecord> lookup(const KnowledgeBase& kb, std::string_view food_id);

/// Case-insensitive, whitespace-trimmed lookup in the record's portion table.
std::optional<double> resolve_portion(const FoodRecord& record, std::string_view portion_name);

struct KbStats {
    std::size_t record_count = 0;
    std::size_t category_count = 0;
    std::size_t with_density = 0;
    std::size_t with_portions = 0;
    std::size_t atwater_flagged = 0;
    std::string source_digest;
};

KbStats stats(const KnowledgeBase& kb);

}  // namespace caloraify::kb
