#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "caloraify/caldata_curator.hpp"
#include "caloraify/calorie_engine.hpp"
#include "caloraify/error.hpp"
#include "caloraify/eval_metrics.hpp"
#include "caloraify/ingredient_parser.hpp"
#include "caloraify/json_codec.hpp"
#include "caloraify/nutrition_kb.hpp"
#include "caloraify/retrieval.hpp"
#include "caloraify/service.hpp"
#include "caloraify/text.hpp"
#include "caloraify/vlm_pipeline.hpp"

using namespace caloraify;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// "-" means stdin.
std::string read_text_arg(const std::string& text, const std::string& file) {
    if (!file.empty()) {
        if (file == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
        return read_file(file);
    }
    return text;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string media_type_for(const std::string& path) {
    const std::string lower = text::to_lower(path);
    if (lower.ends_with(".png")) return "image/png";
    if (lower.ends_with(".webp")) return "image/webp";
    return "image/jpeg";
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a dedicated waiter.
void serve(service::ServiceConfig cfg, const std::string& log_path) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    std::ofstream log_file;
    std::ostream* log = &std::cerr;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::app);
        if (!log_file) throw InputError("cannot open " + log_path);
        log = &log_file;
    }

    service::Service svc(cfg, log);
    const int port = svc.bind(cfg.host, cfg.port);
    std::cerr << "listening on " << cfg.host << ":" << port << " (vlm " << service::to_string(cfg.vlm_mode) << ")\n";

    std::thread loader([&] {
        // Load after the socket accepts, so /healthz can answer 503 meanwhile and stop() always lands.
        svc.wait_until_listening();
        try {
            svc.set_runtime(service::load_runtime(cfg));
            std::cerr << "runtime ready\n";
        } catch (const std::exception& e) {
            std::cerr << "error: loading failed: " << e.what() << '\n';
            svc.stop();
        }
    });
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        svc.stop();
    });
    svc.listen();
    loader.join();
    // Wake the waiter if the server stopped for another reason.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"caloraify: retrieval-grounded calorie estimation"};
    app.require_subcommand(1);

    // kb
    auto* kb_cmd = app.add_subcommand("kb", "Knowledge base tools");
    kb_cmd->require_subcommand(1);
    std::string csv_path, out_path, kb_path, query;
    std::size_t k = 3;

    auto* ingest = kb_cmd->add_subcommand("ingest", "Validate a CSV and write a JSONL snapshot");
    ingest->add_option("--csv", csv_path, "Input CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", out_path, "Snapshot path")->required();

    auto* kb_stats = kb_cmd->add_subcommand("stats", "Summary counts and Atwater warnings");
    kb_stats->add_option("--kb", kb_path, "CSV or snapshot")->required()->check(CLI::ExistingFile);

    auto* kb_search = kb_cmd->add_subcommand("search", "Top-k foods for a query");
    kb_search->add_option("--kb", kb_path, "CSV or snapshot")->required()->check(CLI::ExistingFile);
    kb_search->add_option("--query,-q", query, "Query text")->required();
    kb_search->add_option("-k", k, "Number of hits")->check(CLI::PositiveNumber);

    // parse
    auto* parse_cmd = app.add_subcommand("parse", "Parse an ingredient list");
    std::string text_arg, text_file;
    parse_cmd->add_option("--text", text_arg, "Ingredient lines");
    parse_cmd->add_option("--file", text_file, "Read lines from a file ('-' for stdin)");

    // estimate
    auto* estimate_cmd = app.add_subcommand("estimate", "Estimate calories for an ingredient list");
    std::string ingredients, ingredients_file;
    double min_score = 0.35;
    estimate_cmd->add_option("--kb", kb_path, "CSV or snapshot")->required()->check(CLI::ExistingFile);
    estimate_cmd->add_option("--ingredients", ingredients_file, "Ingredient list file ('-' for stdin)");
    estimate_cmd->add_option("--text", ingredients, "Inline ingredient lines");
    estimate_cmd->add_option("-k", k, "Retrieval depth")->check(CLI::PositiveNumber);
    estimate_cmd->add_option("--min-score", min_score, "Match threshold");
    bool answer_only = false;
    estimate_cmd->add_flag("--answer", answer_only, "Print only the rendered answer");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against references, one per line");
    std::string pred_path, ref_path;
    eval::AggregateSpec spec;
    bool eval_json = false;
    eval_cmd->add_option("--pred", pred_path, "Predictions file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--ref", ref_path, "References file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--lambda-rouge", spec.lambda_rouge, "Aggregate weight on ROUGE-L");
    eval_cmd->add_option("--lambda-bleu", spec.lambda_bleu, "Aggregate weight on BLEU");
    eval_cmd->add_flag("--json", eval_json, "Emit only JSON");

    // curate
    auto* curate_cmd = app.add_subcommand("curate", "Sample, pair and split a recipe catalog");
    std::string catalog_path;
    curate::CurateConfig ccfg;
    curate_cmd->add_option("--catalog", catalog_path, "Catalog JSONL")->required()->check(CLI::ExistingFile);
    curate_cmd->add_option("--target", ccfg.target, "Samples to select")->required();
    curate_cmd->add_option("--seed", ccfg.seed, "Random seed")->required();
    curate_cmd->add_option("--out", out_path, "Manifest path")->required();
    curate_cmd->add_option("--max-images", ccfg.max_images, "Images per sample")->check(CLI::PositiveNumber);
    curate_cmd->add_option("--instructions-per-image", ccfg.instructions_per_image, "Instructions per image")
        ->check(CLI::PositiveNumber);
    curate_cmd->add_option("--train", ccfg.ratios.train, "Train ratio");
    curate_cmd->add_option("--val", ccfg.ratios.val, "Validation ratio");
    curate_cmd->add_option("--test", ccfg.ratios.test, "Test ratio");

    // augment
    auto* augment_cmd = app.add_subcommand("augment", "Generate question variants");
    std::string base_question = std::string(vlm::kDefaultStage1Question), rephraser_url;
    std::size_t variants = 5;
    augment_cmd->add_option("--question", base_question, "Base question");
    augment_cmd->add_option("--count,-n", variants, "Number of questions")->check(CLI::PositiveNumber);
    augment_cmd->add_option("--rephraser", rephraser_url, "Rephraser endpoint URL");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Run the two-stage pipeline on one image");
    std::string image_path, stub_fixture, vlm_endpoint, instruction;
    analyze_cmd->add_option("--kb", kb_path, "CSV or snapshot")->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--image", image_path, "Image file")->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--stub-fixture", stub_fixture, "Stub backend fixture (JSONL)");
    analyze_cmd->add_option("--vlm-endpoint", vlm_endpoint, "HTTP VLM endpoint");
    analyze_cmd->add_option("--instruction", instruction, "Stage-1 question override");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    service::ServiceConfig scfg;
    std::string vlm_mode = "stub", request_log;
    serve_cmd->add_option("--host", scfg.host, "Bind address")->envname("CALORAIFY_HOST")->capture_default_str();
    serve_cmd->add_option("--port", scfg.port, "Port (0 = any)")->envname("CALORAIFY_PORT")->capture_default_str();
    serve_cmd->add_option("--kb", scfg.kb_path, "CSV or snapshot")->envname("CALORAIFY_KB")->required();
    serve_cmd->add_option("--vlm-mode", vlm_mode, "stub or http")->envname("CALORAIFY_VLM_MODE")->capture_default_str();
    serve_cmd->add_option("--vlm-endpoint", scfg.vlm_endpoint, "HTTP VLM endpoint")->envname("CALORAIFY_VLM_ENDPOINT");
    serve_cmd->add_option("--stub-fixture", scfg.stub_fixture_path, "Stub backend fixture")->envname("CALORAIFY_STUB_FIXTURE");
    serve_cmd->add_option("--retrieval-k", scfg.retrieval_k, "Retrieval depth")->envname("CALORAIFY_RETRIEVAL_K")->capture_default_str();
    serve_cmd->add_option("--min-score", scfg.min_score, "Match threshold")->envname("CALORAIFY_MIN_SCORE")->capture_default_str();
    serve_cmd->add_option("--lambda-rouge", scfg.lambda_rouge)->envname("CALORAIFY_LAMBDA_ROUGE")->capture_default_str();
    serve_cmd->add_option("--lambda-bleu", scfg.lambda_bleu)->envname("CALORAIFY_LAMBDA_BLEU")->capture_default_str();
    serve_cmd->add_option("--request-timeout-ms", scfg.request_timeout_ms)->envname("CALORAIFY_REQUEST_TIMEOUT_MS")->capture_default_str();
    serve_cmd->add_option("--vlm-retries", scfg.vlm_retries)->envname("CALORAIFY_VLM_RETRIES")->capture_default_str();
    serve_cmd->add_option("--max-image-bytes", scfg.max_image_bytes)->envname("CALORAIFY_MAX_IMAGE_BYTES")->capture_default_str();
    serve_cmd->add_option("--session-capacity", scfg.session_capacity)->envname("CALORAIFY_SESSION_CAPACITY")->capture_default_str();
    serve_cmd->add_option("--vlm-concurrency", scfg.vlm_concurrency)->envname("CALORAIFY_VLM_CONCURRENCY")->capture_default_str();
    serve_cmd->add_option("--request-log", request_log, "JSONL request log (default stderr)")->envname("CALORAIFY_REQUEST_LOG");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            const auto kb = kb::ingest_csv_file(csv_path);
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw InputError("cannot write " + out_path);
            kb::write_snapshot(kb, out);
            for (const auto& w : kb.warnings()) {
                std::cerr << "warning: " << w.food_id << ": Atwater " << text::format_fixed(w.atwater_kcal, 1)
                          << " kcal vs stated " << text::format_fixed(w.stated_kcal, 1) << '\n';
            }
            print_json({{"records", kb.record_count()}, {"source_digest", kb.source_digest()}, {"out", out_path}});
        } else if (kb_stats->parsed()) {
            const auto kb = kb::load_file(kb_path);
            print_json({{"stats", kb::stats(kb)}, {"warnings", kb.warnings()}});
        } else if (kb_search->parsed()) {
            const auto kb = kb::load_file(kb_path);
            const auto index = retrieval::build_index(kb, std::make_shared<retrieval::HashingEmbedder>());
            print_json(index->search(query, k));
        } else if (parse_cmd->parsed()) {
            const auto block = parser::parse_block(read_text_arg(text_arg, text_file));
            print_json(block);
            return block.errors.empty() ? 0 : 2;
        } else if (estimate_cmd->parsed()) {
            const auto kb = kb::load_file(kb_path);
            const auto index = retrieval::build_index(kb, std::make_shared<retrieval::HashingEmbedder>());
            const auto block = parser::parse_block(read_text_arg(ingredients, ingredients_file));
            for (const auto& e : block.errors) std::cerr << "line " << e.line << ": " << e.message << '\n';
            engine::EstimateConfig ecfg;
            ecfg.k = k;
            ecfg.min_score = min_score;
            const auto report = engine::estimate(block.items, *index, kb, ecfg);
            if (!answer_only) print_json(report);
            std::cout << report.generated_answer << '\n';
        } else if (eval_cmd->parsed()) {
            const auto report = eval::evaluate_files(pred_path, ref_path, spec);
            if (!eval_json) std::cout << eval::render_table(report) << '\n';
            print_json(report);
        } else if (curate_cmd->parsed()) {
            const auto catalog = curate::load_catalog_file(catalog_path);
            const auto result = curate::curate(catalog, ccfg);
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw InputError("cannot write " + out_path);
            curate::write_manifest(result, ccfg, out);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            print_json({{"selected", result.selected.size()},
                        {"train", result.manifest.count(curate::Split::train)},
                        {"val", result.manifest.count(curate::Split::val)},
                        {"test", result.manifest.count(curate::Split::test)},
                        {"config_digest", result.config_digest}});
        } else if (augment_cmd->parsed()) {
            std::unique_ptr<curate::Rephraser> rephraser;
            if (!rephraser_url.empty()) rephraser = std::make_unique<curate::HttpRephraser>(rephraser_url);
            const auto r = curate::augment_questions(base_question, rephraser.get(), variants);
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            for (const auto& q : r.questions) std::cout << q << '\n';
        } else if (analyze_cmd->parsed()) {
            if (stub_fixture.empty() == vlm_endpoint.empty()) {
                throw ArgumentError("give exactly one of --stub-fixture or --vlm-endpoint");
            }
            const auto kb = kb::load_file(kb_path);
            const auto index = retrieval::build_index(kb, std::make_shared<retrieval::HashingEmbedder>());
            std::unique_ptr<vlm::VlmBackend> backend;
            if (!stub_fixture.empty()) {
                backend = std::make_unique<vlm::StubBackend>(vlm::StubBackend::from_fixture_file(stub_fixture));
            } else {
                backend = std::make_unique<vlm::HttpBackend>(vlm::HttpBackendConfig{vlm_endpoint});
            }
            const std::string raw = read_file(image_path);
            vlm::Image image{{raw.begin(), raw.end()}, media_type_for(image_path)};
            const auto result = vlm::analyze_image(image, *backend, *index, kb, vlm::PipelineConfig{}, instruction);
            print_json(result);
            return result.parsed.empty() ? 3 : 0;
        } else if (serve_cmd->parsed()) {
            scfg.vlm_mode = service::parse_vlm_mode(vlm_mode);
            scfg.validate();
            serve(scfg, request_log);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
