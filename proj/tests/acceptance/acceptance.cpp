// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "caloraify/caldata_curator.hpp"
#include "caloraify/calorie_engine.hpp"
#include "caloraify/digest.hpp"
#include "caloraify/eval_metrics.hpp"
#include "caloraify/ingredient_parser.hpp"
#include "caloraify/retrieval.hpp"
#include "caloraify/text.hpp"
#include "caloraify/vlm_pipeline.hpp"
#include "oracles.hpp"
#include "service_harness.hpp"

using namespace caloraify;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// Collects the first few failure reasons.
class Checker {
public:
    void expect(bool cond, const std::string& what) {
        if (cond) return;
        ++failures_;
        if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    Outcome outcome(std::string detail) const {
        if (failures_ == 0) return {true, std::move(detail)};
        return {false, std::to_string(failures_) + " failures: " + notes_};
    }

private:
    std::size_t failures_ = 0;
    std::string notes_;
};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300}); }

std::string fmt(double v, int decimals = 6) { return text::format_fixed(v, decimals); }

Outcome aggregate_weights() {
    Checker c;
    auto [lr, lb] = oracle::solve2x2(0.1643, 0.0135, 0.1734, 0.0218, 0.431, 0.4662);
    c.expect(std::abs(lr - 2.5) < 1e-3, "lambda_rouge " + fmt(lr));
    c.expect(std::abs(lb - 1.5) < 1e-3, "lambda_bleu " + fmt(lb));
    const eval::AggregateSpec spec;
    const double a1 = eval::aggregate(0.1643, 0.0135, spec);
    const double a2 = eval::aggregate(0.1734, 0.0218, spec);
    c.expect(std::abs(a1 - 0.431) < 5e-4, "row 1 aggregate " + fmt(a1));
    c.expect(std::abs(a2 - 0.4662) < 5e-4, "row 2 aggregate " + fmt(a2));
    c.expect(spec.lambda_rouge == 2.5 && spec.lambda_bleu == 1.5, "defaults");
    return c.outcome("solved lambda_rouge=" + fmt(lr) + " lambda_bleu=" + fmt(lb) + ", aggregates " + fmt(a1, 4) + " / " +
                     fmt(a2, 4));
}

Outcome scale_consistency() {
    Checker c;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<eval::SequencePair> pairs;
        for (int i = 0; i < 1 + static_cast<int>(rng() % 6); ++i) {
            pairs.push_back({oracle::random_tokens(rng, 15, 8), oracle::random_tokens(rng, 15, 8)});
        }
        const double b = eval::corpus_bleu(pairs);
        c.expect(eval::scaled_bleu(pairs) == 100.0 * b, "scaled != 100*bleu at trial " + std::to_string(trial));
    }
    // Reference scaled/unit pairs, recorded only.
    const double d1 = std::abs(1.3518 / 100.0 - 0.0135) / 0.0135;
    const double d2 = std::abs(2.1845 / 100.0 - 0.0218) / 0.0218;
    return c.outcome("500 corpora exact; reference scaled/unit pairs differ by " + fmt(100 * d1, 3) + "% and " +
                     fmt(100 * d2, 3) + "% (recorded, bound 1.4%)");
}

std::string join_sentences(const std::vector<oracle::Tokens>& sents) {
    std::string out;
    for (std::size_t s = 0; s < sents.size(); ++s) {
        if (s) out += '\n';
        for (std::size_t t = 0; t < sents[s].size(); ++t) {
            if (t) out += ' ';
            out += sents[s][t];
        }
    }
    return out;
}

Outcome metric_oracles() {
    Checker c;
    std::mt19937_64 rng(1234);
    std::vector<eval::SequencePair> corpus;
    std::vector<std::pair<oracle::Tokens, oracle::Tokens>> oracle_corpus;
    for (int i = 0; i < 1000; ++i) {
        const auto cand = oracle::random_tokens(rng, 12, 6);
        const auto ref = oracle::random_tokens(rng, 12, 6);
        const std::string tag = " pair " + std::to_string(i);
        c.expect(eval::rouge_n(cand, ref, 1) == oracle::rouge_n(cand, ref, 1), "rouge1" + tag);
        c.expect(eval::rouge_n(cand, ref, 2) == oracle::rouge_n(cand, ref, 2), "rouge2" + tag);
        c.expect(eval::rouge_l(cand, ref) == oracle::rouge_l(cand, ref), "rougeL" + tag);

        std::vector<oracle::Tokens> cs, rs;
        for (int s = 0; s < 1 + static_cast<int>(rng() % 3); ++s) {
            auto t = oracle::random_tokens(rng, 6, 6);
            if (!t.empty()) cs.push_back(t);
        }
        for (int s = 0; s < 1 + static_cast<int>(rng() % 3); ++s) {
            auto t = oracle::random_tokens(rng, 6, 6);
            if (!t.empty()) rs.push_back(t);
        }
        c.expect(eval::rouge_lsum(join_sentences(cs), join_sentences(rs)) == oracle::rouge_lsum(cs, rs), "rougeLsum" + tag);

        corpus.push_back({cand, ref});
        oracle_corpus.emplace_back(cand, ref);
        if (i % 10 == 9) {
            c.expect(eval::corpus_bleu(corpus) == oracle::corpus_bleu(oracle_corpus), "bleu up to" + tag);
            corpus.clear();
            oracle_corpus.clear();
        }
    }
    // metric(x, x) = 1
    for (int i = 0; i < 200; ++i) {
        auto x = oracle::random_tokens(rng, 12, 12);
        while (x.size() < 4) x.push_back("pad");
        c.expect(eval::rouge_n(x, x, 1) == 1.0, "rouge1(x,x)");
        c.expect(eval::rouge_n(x, x, 2) == 1.0, "rouge2(x,x)");
        c.expect(eval::rouge_l(x, x) == 1.0, "rougeL(x,x)");
        const std::string s = join_sentences({x});
        c.expect(eval::rouge_lsum(s, s) == 1.0, "rougeLsum(x,x)");
        std::vector<eval::SequencePair> one = {{x, x}};
        c.expect(std::abs(eval::corpus_bleu(one) - 1.0) < 1e-15, "bleu(x,x)");
    }
    return c.outcome("1000 random pairs exact on ROUGE-1/2/L/Lsum, 100 BLEU corpora exact, 200 identity cases");
}

Outcome retrieval_exactness() {
    Checker c;
    std::mt19937_64 rng(77);
    auto embedder = std::make_shared<retrieval::HashingEmbedder>();
    retrieval::VectorIndex index(embedder);
    std::vector<std::string> ids;
    std::vector<std::vector<double>> raw;
    auto random_text = [&](int max_words) {
        std::string t;
        for (int w = 0; w < 1 + static_cast<int>(rng() % max_words); ++w) t += "t" + std::to_string(rng() % 60) + " ";
        return t;
    };
    for (int d = 0; d < 1000; ++d) {
        // every fifth document repeats an earlier text so exact ties occur
        const std::string text = (d % 5 == 4) ? std::string("t") + std::to_string(d % 60) : random_text(5);
        char id[16];
        std::snprintf(id, sizeof id, "d%04d", static_cast<int>((d * 617) % 1000));
        ids.emplace_back(id);
        raw.push_back(oracle::reference_vector(text));
        index.add(id, text);
    }
    std::size_t tie_groups = 0;
    for (int q = 0; q < 100; ++q) {
        const std::string query = (q % 4 == 0) ? "t" + std::to_string(rng() % 60) : random_text(3);
        const auto qv = oracle::reference_vector(query);
        for (std::size_t k : {1u, 5u, 10u}) {
            const auto got = index.search(query, k);
            const auto want = oracle::brute_force_topk(ids, raw, qv, k);
            c.expect(got.hits.size() == want.size(), "size mismatch");
            for (std::size_t i = 0; i < std::min(got.hits.size(), want.size()); ++i) {
                c.expect(got.hits[i].doc_id == want[i].id, "id at rank " + std::to_string(i) + " for '" + query + "'");
                c.expect(std::abs(got.hits[i].score - want[i].score) <= 1e-12, "score at rank " + std::to_string(i));
                if (i > 0 && got.hits[i].score == got.hits[i - 1].score) {
                    ++tie_groups;
                    c.expect(got.hits[i - 1].doc_id < got.hits[i].doc_id, "tie order");
                }
            }
        }
    }
    c.expect(tie_groups > 0, "no ties exercised");
    return c.outcome("1000 docs x 100 queries x k in {1,5,10}; " + std::to_string(tie_groups) + " tied neighbours ordered by id");
}

Outcome parser_engine_properties() {
    Checker c;
    std::mt19937_64 rng(555);
    const std::vector<std::string> words = {"flour", "olive", "oil", "brown", "sugar", "egg", "whole", "milk",
                                            "rice", "fresh", "of", "chicken", "breast", "tomatoes", "garlic"};
    const auto table = parser::unit_table();
    std::uniform_real_distribution<double> q(0.001, 2000.0);
    std::size_t round_trips = 0;
    while (round_trips < 1500) {
        parser::ParsedIngredient item;
        item.quantity = (rng() % 3 == 0) ? static_cast<double>(1 + rng() % 20) : q(rng);
        item.unit = table[rng() % table.size()];
        for (std::size_t w = 0, n = 1 + rng() % 4; w < n; ++w) item.name += (w ? " " : "") + words[rng() % words.size()];
        if (item.name == "of") continue;
        const std::string line = parser::format_ingredient(item);
        try {
            const auto back = parser::parse_line(line);
            c.expect(back.quantity == item.quantity && back.unit == item.unit && back.name == item.name, "round-trip '" + line + "'");
        } catch (const std::exception& e) {
            c.expect(false, "round-trip '" + line + "': " + e.what());
        }
        ++round_trips;
    }

    std::size_t compositions = 0;
    for (int i = 0; i < 5000; ++i) {
        const auto& a = table[rng() % table.size()];
        const auto& b = table[rng() % table.size()];
        const auto& d = table[rng() % table.size()];
        if (a.kind != b.kind || b.kind != d.kind) continue;
        const double x = q(rng);
        c.expect(rel_close(parser::convert(parser::convert(x, a, b), b, d), parser::convert(x, a, d), 1e-9),
                 "compose " + a.name + "->" + b.name + "->" + d.name);
        ++compositions;
    }

    fixtures::Stack stack;
    const std::vector<std::string> names = {"flour", "eggs", "butter", "sugar", "milk", "olive oil", "rice",
                                            "chicken breast", "banana", "tomatoes", "garlic", "salt", "zzqx"};
    const std::vector<std::string> units = {"g", "cup", "tbsp", "tsp", "piece", "oz", "ml", "slice", "clove", "lb"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<parser::ParsedIngredient> items;
        for (int i = 0; i < 1 + static_cast<int>(rng() % 6); ++i) {
            items.push_back(parser::parse_line(text::format_double(q(rng)) + " " + units[rng() % units.size()] + " " +
                                               names[rng() % names.size()]));
        }
        const auto base = engine::estimate(items, *stack.index, stack.kb);
        double sum = 0.0;
        for (const auto& e : base.estimates) sum += e.kcal;
        c.expect(rel_close(base.total_kcal, sum, 1e-6), "additivity");
        const double s = 0.5 + static_cast<double>(rng() % 40) / 4.0;
        auto scaled = items;
        for (auto& it : scaled) it.quantity *= s;
        const auto big = engine::estimate(scaled, *stack.index, stack.kb);
        c.expect(big.total_kcal == 0.0 ? base.total_kcal == 0.0 : rel_close(big.total_kcal, s * base.total_kcal, 1e-6),
                 "homogeneity");
        // splitting the list in two and adding the parts
        const std::size_t cut = items.size() / 2;
        const auto left = engine::estimate(std::span(items).first(cut), *stack.index, stack.kb);
        const auto right = engine::estimate(std::span(items).subspan(cut), *stack.index, stack.kb);
        c.expect(rel_close(left.total_kcal + right.total_kcal, base.total_kcal, 1e-6) ||
                     (base.total_kcal == 0.0 && left.total_kcal + right.total_kcal == 0.0),
                 "split additivity");
    }
    return c.outcome(std::to_string(round_trips) + " round-trips, " + std::to_string(compositions) +
                     " conversion compositions, 300 homogeneity/additivity trials");
}

Outcome curator_arithmetic() {
    Checker c;
    constexpr std::size_t kSamples = 5801;
    c.expect(319055 % kSamples == 0 && 319055 / kSamples == 55, "319055 / 5801 is not 55");
    std::vector<curate::RecipeSample> catalog;
    catalog.reserve(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) {
        curate::RecipeSample s;
        s.sample_id = "r" + std::to_string(i);
        s.class_label = "class" + std::to_string(i % 101);
        for (int k = 0; k < 11; ++k) s.image_ids.push_back("i" + std::to_string(k));
        for (int k = 0; k < 5; ++k) s.instructions.push_back("q" + std::to_string(k));
        catalog.push_back(std::move(s));
    }
    curate::CurateConfig cfg;
    cfg.target = kSamples;
    cfg.seed = 20240501;
    cfg.max_images = 11;
    cfg.instructions_per_image = 5;
    const auto a = curate::curate(catalog, cfg);
    const auto& m = a.manifest;
    const std::size_t train = m.count(curate::Split::train), val = m.count(curate::Split::val), test = m.count(curate::Split::test);
    c.expect(train == 191433, "train " + std::to_string(train));
    c.expect(val == 63811, "val " + std::to_string(val));
    c.expect(test == 63811, "test " + std::to_string(test));
    c.expect(m.entries.size() == 319055, "total " + std::to_string(m.entries.size()));

    // partition: every pair exactly once, each sample split 33/11/11
    std::unordered_map<std::string, std::array<int, 3>> per_sample;
    std::unordered_set<std::string> seen;
    for (const auto& e : m.entries) {
        c.expect(seen.insert(e.pair.pair_id).second, "duplicate pair " + e.pair.pair_id);
        per_sample[e.pair.sample_id][static_cast<int>(e.split)]++;
    }
    c.expect(per_sample.size() == kSamples, "sample coverage");
    for (const auto& [id, n] : per_sample) c.expect(n[0] == 33 && n[1] == 11 && n[2] == 11, "per-sample split " + id);

    std::ostringstream first, second, other;
    curate::write_manifest(a, cfg, first);
    curate::write_manifest(curate::curate(catalog, cfg), cfg, second);
    c.expect(first.str() == second.str(), "manifests differ for identical seeds");
    cfg.seed += 1;
    curate::write_manifest(curate::curate(catalog, cfg), cfg, other);
    c.expect(first.str() != other.str(), "different seeds gave identical manifests");
    return c.outcome("5801 x 55 -> " + std::to_string(train) + "/" + std::to_string(val) + "/" + std::to_string(test) +
                     ", manifest sha256 " + sha256_hex(first.str()).substr(0, 16));
}

Outcome end_to_end() {
    Checker c;
    const std::string dish = harness::fixture_string("fixture_dish.png");
    std::vector<std::string> bodies;
    for (int run = 0; run < 2; ++run) {
        harness::RunningService svc(harness::stub_config());
        auto client = svc.client();
        for (int replay = 0; replay < 3; ++replay) {
            auto r = harness::post_image(client, dish, "image/png");
            if (!r) {
                c.expect(false, "no response");
                continue;
            }
            c.expect(r->status == 200, "status " + std::to_string(r->status));
            bodies.push_back(r->body);
        }
    }
    double total = -1;
    if (!bodies.empty()) {
        const auto j = nlohmann::json::parse(bodies.front());
        total = j.at("report").at("total_kcal").get<double>();
        c.expect(std::abs(total - 820.0) < 1e-9, "total " + fmt(total));
        c.expect(j.at("final_answer") == "flour — 200.0 g — 700 kcal\neggs — 150.0 g — 120 kcal\nTOTAL: 820 kcal",
                 "final answer");
    }
    for (const auto& b : bodies) c.expect(b == bodies.front(), "response bytes differ");
    return c.outcome("2 server runs x 3 replays byte-identical, total " + fmt(total, 1) + " kcal");
}

Outcome prompt_golden() {
    Checker c;
    std::mt19937_64 rng(9);
    const std::vector<std::string> pieces = {"What", "ingredients", "are", "in", "this", "dish?", "List", "quantities",
                                             "for", "the", "recipe.", "½", "cup", "naïve", "\"quoted\"", "{braces}"};
    for (int i = 0; i < 100; ++i) {
        std::string instr;
        for (std::size_t w = 0, n = 1 + rng() % 10; w < n; ++w) instr += (w ? " " : "") + pieces[rng() % pieces.size()];
        const std::string padded = (i % 3 == 0 ? "  " : "") + instr + (i % 4 == 0 ? " \n" : "");
        const std::string expected = "[INST]<Img><ImageHere></Img>[vqa] " + instr + " [/INST]";
        c.expect(vlm::build_prompt(vlm::TaskIdentifier::vqa, padded) == expected, "instruction " + std::to_string(i));
    }
    return c.outcome("100 generated instructions byte-exact");
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_s;
    };
    const std::vector<Criterion> criteria = {
        {"aggregate-weight recovery", aggregate_weights, 1},
        {"scale consistency", scale_consistency, 5},
        {"metric oracle equivalence", metric_oracles, 10},
        {"retrieval exactness", retrieval_exactness, 10},
        {"parser/engine properties", parser_engine_properties, 10},
        {"curator arithmetic", curator_arithmetic, 30},
        {"end-to-end determinism", end_to_end, 5},
        {"prompt golden", prompt_golden, 1},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.ok && secs > cr.budget_s) o = {false, "over the " + text::format_fixed(cr.budget_s, 0) + " s budget; " + o.detail};
        if (!o.ok) ++failed;
        std::cout << (o.ok ? "PASS" : "FAIL") << "  " << cr.name << "  [" << text::format_fixed(secs, 2) << " s]  "
                  << o.detail << '\n';
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
