#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace caloraify::curate {

struct RecipeSample {
    std::string sample_id;
    std::string class_label;
    std::vector<std::string> image_ids;
    std::vector<std::string> instructions;
    std::string nutrition_text;

    bool operator==(const RecipeSample&) const = default;
};

/// Line-delimited JSON, one RecipeSample per line.
std::vector<RecipeSample> load_catalog(std::istream& in);
std::vector<RecipeSample> load_catalog_file(const std::string& path);

/// splitmix64. `below(n)` is `next() % n`, which keeps manifests reproducible across languages at the
/// cost of a negligible modulo bias.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

private:
    std::uint64_t state_;
};

/// Fisher–Yates from the back: for i = n-1 down to 1, swap(v[i], v[below(i+1)]).
template <class T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Round-robin over class labels in lexicographic order, one draw per class per round, each class
/// pre-shuffled from a single stream seeded with `seed` (classes consumed in label order).
/// Throws ArgumentError when target exceeds the catalog size.
std::vector<std::string> class_balanced_sample(std::span<const RecipeSample> catalog, std::size_t target,
                                               std::uint64_t seed);

struct PairEntry {
    std::string pair_id;  ///< `{sample_id}:{image_id}:{instruction_index}`
    std::string sample_id;
    std::string image_id;
    std::size_t instruction_index = 0;

    bool operator==(const PairEntry&) const = default;
};

inline constexpr std::size_t kDefaultMaxImages = 5;
inline constexpr std::size_t kDefaultInstructionsPerImage = 5;

/// Cartesian product of the first `max_images` images and first `instructions_per_image`
/// instructions, image-major. A sample without images yields no pairs.
std::vector<PairEntry> build_pairs(const RecipeSample& sample, std::size_t max_images = kDefaultMaxImages,
                                   std::size_t instructions_per_image = kDefaultInstructionsPerImage);

enum class Split { train, val, test };

std::string_view to_string(Split split);

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

/// Largest-remainder allocation of `n` items; ties in the remainder go to the earlier split.
std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& ratios);

struct ManifestEntry {
    PairEntry pair;
    Split split = Split::train;
};

struct PairManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;
    SplitRatios ratios;

    std::size_t count(Split split) const;
};

/// Splits within each sample: the sample's pairs are shuffled and cut by split_counts. Samples are
/// processed in first-appearance order from one stream seeded with `seed`; entries keep input order.
/// Throws ArgumentError on non-positive ratios or ratios not summing to 1 within 1e-12.
PairManifest split(std::span<const PairEntry> pairs, const SplitRatios& ratios, std::uint64_t seed);

struct CurateConfig {
    std::size_t target = 0;
    std::uint64_t seed = 0;
    std::size_t max_images = kDefaultMaxImages;
    std::size_t instructions_per_image = kDefaultInstructionsPerImage;
    SplitRatios ratios;
};

struct CurationResult {
    std::vector<std::string> selected;
    PairManifest manifest;
    std::vector<std::string> warnings;
    std::string config_digest;
};

/// Sample, pair, and split a catalog.
CurationResult curate(std::span<const RecipeSample> catalog, const CurateConfig& config);

/// Header line (seed, ratios, config digest, counts) followed by one line per entry.
void write_manifest(const CurationResult& result, const CurateConfig& config, std::ostream& out);

class Rephraser {
public:
    virtual ~Rephraser() = default;
    /// May throw TransportError.
    virtual std::vector<std::string> rephrase(const std::string& text, std::size_t n) = 0;
};

/// POST {"text": s, "n": k} -> {"variants": [...]}.
class HttpRephraser final : public Rephraser {
public:
    explicit HttpRephraser(std::string endpoint_url, int timeout_ms = 10000, int retries = 1);
    std::vector<std::string> rephrase(const std::string& text, std::size_t n) override;

private:
    std::string url_;
    int timeout_ms_;
    int retries_;
};

/// Deterministic rewrites of a question: question/command flip, synonym swaps, and prefixes.
std::vector<std::string> rule_based_variants(std::string_view base);

struct AugmentResult {
    std::vector<std::string> questions;
    std::vector<std::string> warnings;
};

/// Base first, then rephraser variants (if any), topped up with rule-based variants; deduplicated and
/// cut to `count`. A failing rephraser is recorded as a warning. Throws ArgumentError when count < 1.
AugmentResult augment_questions(std::string_view base, Rephraser* rephraser, std::size_t count);

}  // namespace caloraify::curate
