#include "caloraify/caldata_curator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "caloraify/digest.hpp"
#include "caloraify/error.hpp"
#include "caloraify/json_codec.hpp"
#include "caloraify/text.hpp"
#include "http_endpoint.hpp"

namespace caloraify::curate {

std::vector<RecipeSample> load_catalog(std::istream& in) {
    std::vector<RecipeSample> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<RecipeSample>());
        } catch (const nlohmann::json::exception& e) {
            throw InputError("catalog line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(out.back().sample_id).second) {
            throw InputError("catalog line " + std::to_string(line_no) + ": duplicate sample_id '" + out.back().sample_id + "'");
        }
    }
    return out;
}

std::vector<RecipeSample> load_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return load_catalog(in);
}

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::string> class_balanced_sample(std::span<const RecipeSample> catalog, std::size_t target,
                                               std::uint64_t seed) {
    if (target > catalog.size()) {
        throw ArgumentError("target " + std::to_string(target) + " exceeds catalog size " + std::to_string(catalog.size()));
    }
    std::map<std::string, std::vector<std::string>> by_class;
    for (const auto& s : catalog) by_class[s.class_label].push_back(s.sample_id);

    SplitMix64 rng(seed);
    for (auto& [label, ids] : by_class) shuffle(ids, rng);

    std::vector<std::string> selected;
    selected.reserve(target);
    for (std::size_t round = 0; selected.size() < target; ++round) {
        for (const auto& [label, ids] : by_class) {
            if (selected.size() == target) break;
            if (round < ids.size()) selected.push_back(ids[round]);
        }
    }
    return selected;
}

std::vector<PairEntry> build_pairs(const RecipeSample& sample, std::size_t max_images,
                                   std::size_t instructions_per_image) {
    if (max_images < 1) throw ArgumentError("max_images must be >= 1");
    std::vector<PairEntry> out;
    const std::size_t images = std::min(max_images, sample.image_ids.size());
    const std::size_t instructions = std::min(instructions_per_image, sample.instructions.size());
    out.reserve(images * instructions);
    for (std::size_t i = 0; i < images; ++i) {
        for (std::size_t j = 0; j < instructions; ++j) {
            const std::string& image = sample.image_ids[i];
            out.push_back({sample.sample_id + ":" + image + ":" + std::to_string(j), sample.sample_id, image, j});
        }
    }
    return out;
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

namespace {

void validate(const SplitRatios& r) {
    for (double v : {r.train, r.val, r.test}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("split ratios must be positive");
    }
    if (std::abs(r.train + r.val + r.test - 1.0) > 1e-12) throw ArgumentError("split ratios must sum to 1");
}

}  // namespace

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& ratios) {
    const std::array<double, 3> quota = {ratios.train * static_cast<double>(n), ratios.val * static_cast<double>(n),
                                         ratios.test * static_cast<double>(n)};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        // The epsilon absorbs products like 0.6 * 5 = 3.0000000000000004 and 0.2 * 15 = 2.9999...
        const double floored = std::floor(quota[i] + 1e-9);
        counts[i] = static_cast<std::size_t>(std::max(0.0, floored));
        remainder[i] = quota[i] - floored;
        assigned += counts[i];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++counts[order[k]];
    while (assigned > n) {
        for (std::size_t i = 3; i-- > 0 && assigned > n;) {
            if (counts[order[i]] > 0) {
                --counts[order[i]];
                --assigned;
            }
        }
    }
    return counts;
}

std::size_t PairManifest::count(Split s) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [s](const ManifestEntry& e) { return e.split == s; }));
}

PairManifest split(std::span<const PairEntry> pairs, const SplitRatios& ratios, std::uint64_t seed) {
    validate(ratios);
    PairManifest manifest;
    manifest.seed = seed;
    manifest.ratios = ratios;
    manifest.entries.reserve(pairs.size());

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> members;
    std::set<std::string> pair_ids;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pair_ids.insert(pairs[i].pair_id).second) {
            throw ArgumentError("duplicate pair_id '" + pairs[i].pair_id + "'");
        }
        auto [it, inserted] = members.try_emplace(pairs[i].sample_id);
        if (inserted) order.push_back(pairs[i].sample_id);
        it->second.push_back(i);
        manifest.entries.push_back({pairs[i], Split::train});
    }

    SplitMix64 rng(seed);
    for (const auto& sample : order) {
        std::vector<std::size_t> shuffled = members[sample];
        shuffle(shuffled, rng);
        const auto counts = split_counts(shuffled.size(), ratios);
        for (std::size_t k = 0; k < shuffled.size(); ++k) {
            const Split s = k < counts[0] ? Split::train : (k < counts[0] + counts[1] ? Split::val : Split::test);
            manifest.entries[shuffled[k]].split = s;
        }
    }
    return manifest;
}

namespace {

nlohmann::json config_json(const CurateConfig& config, const std::string& catalog_digest) {
    return {
        {"catalog_digest", catalog_digest},
        {"target", config.target},
        {"seed", config.seed},
        {"max_images", config.max_images},
        {"instructions_per_image", config.instructions_per_image},
        {"ratios", {config.ratios.train, config.ratios.val, config.ratios.test}},
    };
}

}  // namespace

CurationResult curate(std::span<const RecipeSample> catalog, const CurateConfig& config) {
    validate(config.ratios);
    std::unordered_map<std::string, const RecipeSample*> by_id;
    std::string catalog_bytes;
    for (const auto& s : catalog) {
        if (!by_id.emplace(s.sample_id, &s).second) throw ArgumentError("duplicate sample_id '" + s.sample_id + "'");
        catalog_bytes += nlohmann::json(s).dump();
        catalog_bytes += '\n';
    }

    CurationResult result;
    result.config_digest = sha256_hex(config_json(config, sha256_hex(catalog_bytes)).dump());
    result.selected = class_balanced_sample(catalog, config.target, config.seed);

    std::vector<PairEntry> pairs;
    for (const auto& id : result.selected) {
        const RecipeSample& sample = *by_id.at(id);
        auto sample_pairs = build_pairs(sample, config.max_images, config.instructions_per_image);
        if (sample.image_ids.empty()) {
            result.warnings.push_back("sample '" + id + "' has no images; skipped");
        } else if (sample_pairs.empty()) {
            result.warnings.push_back("sample '" + id + "' has no instructions; skipped");
        }
        pairs.insert(pairs.end(), std::make_move_iterator(sample_pairs.begin()), std::make_move_iterator(sample_pairs.end()));
    }
    result.manifest = split(pairs, config.ratios, config.seed);
    return result;
}

void write_manifest(const CurationResult& result, const CurateConfig& config, std::ostream& out) {
    const auto& m = result.manifest;
    nlohmann::json header = {
        {"kind", "header"},
        {"seed", m.seed},
        {"ratios", {m.ratios.train, m.ratios.val, m.ratios.test}},
        {"config_digest", result.config_digest},
        {"target", config.target},
        {"max_images", config.max_images},
        {"instructions_per_image", config.instructions_per_image},
        {"selected_samples", result.selected.size()},
        {"counts", {{"train", m.count(Split::train)}, {"val", m.count(Split::val)}, {"test", m.count(Split::test)}}},
    };
    out << header.dump() << '\n';
    for (const auto& e : m.entries) out << nlohmann::json(e).dump() << '\n';
}

HttpRephraser::HttpRephraser(std::string endpoint_url, int timeout_ms, int retries)
    : url_(std::move(endpoint_url)), timeout_ms_(timeout_ms), retries_(retries) {
    detail::parse_endpoint(url_);
}

std::vector<std::string> HttpRephraser::rephrase(const std::string& base, std::size_t n) {
    const std::string body = detail::post_json(url_, nlohmann::json{{"text", base}, {"n", n}}.dump(), timeout_ms_, retries_);
    try {
        return nlohmann::json::parse(body).at("variants").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed rephraser response: ") + e.what(), 1);
    }
}

namespace {

const std::vector<std::pair<std::string_view, std::string_view>>& synonyms() {
    static const std::vector<std::pair<std::string_view, std::string_view>> table = {
        {"ingredients", "components"},
        {"quantities", "amounts"},
        {"recipe", "dish"},
        {"dish", "meal"},
    };
    return table;
}

std::string lower_first(std::string_view s) {
    std::string out(s);
    if (out.size() >= 2 && out[0] >= 'A' && out[0] <= 'Z' && !(out[1] >= 'A' && out[1] <= 'Z')) out[0] = static_cast<char>(out[0] - 'A' + 'a');
    if (out.size() == 1) out = text::to_lower(out);
    return out;
}

std::string upper_first(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

// Replaces whole words found in `table`, all in one pass so "recipe" -> "dish" is not re-mapped to "meal".
std::string substitute(std::string_view s, std::span<const std::pair<std::string_view, std::string_view>> table) {
    std::string out;
    std::size_t i = 0;
    auto is_letter = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    while (i < s.size()) {
        if (!is_letter(s[i])) {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_letter(s[j])) ++j;
        std::string_view word = s.substr(i, j - i);
        std::string replacement(word);
        for (const auto& [from, to] : table) {
            if (text::iequals(word, from)) {
                replacement = std::string(to);
                if (word[0] >= 'A' && word[0] <= 'Z') replacement = upper_first(replacement);
                break;
            }
        }
        out += replacement;
        i = j;
    }
    return out;
}

std::string flip(std::string_view s) {
    s = text::trim(s);
    if (s.empty()) return {};
    if (s.back() == '?') {
        std::string_view body = text::trim(s.substr(0, s.size() - 1));
        return "Tell me " + lower_first(body) + ".";
    }
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.remove_suffix(1);
    return "Can you " + lower_first(text::trim(s)) + "?";
}

void push_unique(std::vector<std::string>& out, std::string candidate) {
    candidate = std::string(text::trim(candidate));
    if (candidate.empty()) return;
    if (std::find(out.begin(), out.end(), candidate) == out.end()) out.push_back(std::move(candidate));
}

}  // namespace

std::vector<std::string> rule_based_variants(std::string_view base) {
    const std::string b(text::trim(base));
    std::vector<std::string> out;
    push_unique(out, flip(b));
    const std::string all_synonyms = substitute(b, synonyms());
    push_unique(out, all_synonyms);
    for (const auto& entry : synonyms()) push_unique(out, substitute(b, std::span(&entry, 1)));
    for (std::string_view prefix : {"Looking at this photo, ", "Based on the image, ", "For the dish shown, "}) {
        push_unique(out, std::string(prefix) + lower_first(b));
    }
    push_unique(out, flip(all_synonyms));
    std::erase(out, b);
    return out;
}

AugmentResult augment_questions(std::string_view base, Rephraser* rephraser, std::size_t count) {
    if (count < 1) throw ArgumentError("count must be >= 1");
    AugmentResult result;
    const std::string b(text::trim(base));
    if (b.empty()) throw ArgumentError("base question must not be empty");
    result.questions.push_back(b);

    if (rephraser && count > 1) {
        try {
            for (auto& v : rephraser->rephrase(b, count - 1)) {
                if (result.questions.size() == count) break;
                push_unique(result.questions, std::move(v));
            }
        } catch (const TransportError& e) {
            result.warnings.push_back(std::string("rephraser unavailable, using rule-based variants: ") + e.what());
        }
    }
    if (result.questions.size() < count) {
        for (auto& v : rule_based_variants(b)) {
            if (result.questions.size() == count) break;
            push_unique(result.questions, std::move(v));
        }
    }
    if (result.questions.size() < count) {
        result.warnings.push_back("only " + std::to_string(result.questions.size()) + " distinct variants available");
    }
    return result;
}

}  // namespace caloraify::curate
