#include "caloraify/vlm_pipeline.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "caloraify/digest.hpp"
#include "caloraify/error.hpp"
#include "caloraify/text.hpp"
#include "http_endpoint.hpp"

namespace caloraify::vlm {

std::string_view to_string(TaskIdentifier task) {
    switch (task) {
        case TaskIdentifier::vqa: return "vqa";
        case TaskIdentifier::grounding: return "grounding";
    }
    return "vqa";
}

std::string build_prompt(TaskIdentifier task, std::string_view instruction) {
    const std::string_view body = text::trim(instruction);
    if (body.empty()) throw ArgumentError("prompt instruction must not be empty");
    std::string out = "[INST]<Img><ImageHere></Img>[";
    out += to_string(task);
    out += "] ";
    out += body;
    out += " [/INST]";
    return out;
}

std::string Image::digest() const { return sha256_hex(std::span<const std::uint8_t>(bytes)); }

StubBackend::StubBackend(std::unordered_map<std::string, std::string> responses, std::string default_response)
    : responses_(std::move(responses)), default_response_(std::move(default_response)) {}

StubBackend StubBackend::from_fixture(std::istream& in, std::string default_response) {
    std::unordered_map<std::string, std::string> responses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            responses[text::to_lower(j.at("digest").get<std::string>())] = j.at("response").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError("stub fixture line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return StubBackend(std::move(responses), std::move(default_response));
}

StubBackend StubBackend::from_fixture_file(const std::string& path, std::string default_response) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open stub fixture " + path);
    return from_fixture(in, std::move(default_response));
}

std::string StubBackend::generate(const PromptEnvelope& prompt) {
    auto it = responses_.find(sha256_hex(prompt.image_bytes));
    return it == responses_.end() ? default_response_ : it->second;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ArgumentError("http backend needs an endpoint");
    detail::parse_endpoint(config_.endpoint);
}

std::string HttpBackend::generate(const PromptEnvelope& prompt) {
    nlohmann::json request = {
        {"prompt", prompt.text},
        {"image_b64", base64_encode(prompt.image_bytes)},
        {"media_type", prompt.media_type},
        {"max_tokens", prompt.max_tokens},
    };
    const std::string body = detail::post_json(config_.endpoint, request.dump(), config_.timeout_ms, config_.retries);
    try {
        return nlohmann::json::parse(body).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed VLM response: ") + e.what(), 1);
    }
}

AnalysisResult analyze_image(const Image& image, VlmBackend& backend, const retrieval::VectorIndex& index,
                             const kb::KnowledgeBase& kb, const PipelineConfig& config, std::string_view instruction) {
    if (image.bytes.empty()) throw ArgumentError("image is empty");
    const std::string_view question = text::trim(instruction).empty() ? std::string_view(config.stage1_question) : instruction;

    PromptEnvelope prompt{build_prompt(TaskIdentifier::vqa, question), image.bytes, image.media_type, config.max_tokens};
    AnalysisResult result;
    result.stage1_text = backend.generate(prompt);
    result.parsed = parser::parse_block(result.stage1_text).items;
    if (result.parsed.empty()) {
        result.final_answer = std::string(kNoIngredientsMessage);
        result.report.generated_answer = result.final_answer;
        return result;
    }
    result.report = engine::estimate(result.parsed, index, kb, config.estimate);
    result.final_answer = result.report.generated_answer;
    return result;
}

std::string_view to_string(Role role) { return role == Role::user ? "user" : "assistant"; }

ChatSession::ChatSession(std::string session_id)
    : id_(std::move(session_id)), created_at_(std::chrono::system_clock::now()) {}

void ChatSession::append(Role role, std::string text, std::optional<std::string> image_digest) {
    const Role expected = (turns_.empty() || turns_.back().role == Role::assistant) ? Role::user : Role::assistant;
    if (role != expected) {
        throw ArgumentError("session " + id_ + ": expected a " + std::string(to_string(expected)) + " turn, got " +
                            std::string(to_string(role)));
    }
    turns_.push_back({role, std::move(text), std::move(image_digest)});
}

void ChatSession::remember(AnalysisResult analysis, Image image) {
    last_analysis_ = std::move(analysis);
    last_image_ = std::move(image);
}

namespace {

bool mentions(std::string_view question, std::string_view name) {
    if (name.empty()) return false;
    if (question.find(name) != std::string_view::npos) return true;
    // "eggs" in the report still answers "how much egg".
    if (name.size() > 3 && name.back() == 's') return question.find(name.substr(0, name.size() - 1)) != std::string_view::npos;
    return false;
}

bool contains_any(std::string_view q, std::initializer_list<std::string_view> words) {
    for (auto w : words) {
        if (q.find(w) != std::string_view::npos) return true;
    }
    return false;
}

std::string flag_suffix(const engine::Flags& flags) {
    std::string out;
    for (auto f : flags.list()) {
        out += " [";
        out += engine::to_string(f);
        out += ']';
    }
    return out;
}

std::string evidence_ids(const retrieval::RetrievedContext& ctx) {
    std::string out;
    for (const auto& hit : ctx.hits) {
        if (!out.empty()) out += ", ";
        out += hit.doc_id;
    }
    return out.empty() ? "none" : out;
}

std::string retrieval_context(const AnalysisResult& analysis) {
    std::string out;
    for (const auto& est : analysis.report.estimates) {
        if (!out.empty()) out += "; ";
        out += est.ingredient.name + " " + text::format_fixed(est.grams, 1) + " g";
        if (est.matched_food_id) {
            out += " matched " + *est.matched_food_id + " = " + std::to_string(engine::round_half_up(est.kcal)) + " kcal";
        } else {
            out += " unmatched";
        }
    }
    out += "; total " + std::to_string(engine::round_half_up(analysis.report.total_kcal)) + " kcal";
    return out;
}

}  // namespace

std::string answer_followup(const AnalysisResult& analysis, std::string_view question) {
    const std::string q = text::to_lower(question);
    const auto& report = analysis.report;
    if (report.estimates.empty()) return analysis.final_answer;

    const bool want_evidence = contains_any(q, {"evidence", "source", "matched", "match"});
    std::string out;
    for (std::size_t i = 0; i < report.estimates.size(); ++i) {
        const auto& est = report.estimates[i];
        if (!mentions(q, est.ingredient.name)) continue;
        if (!out.empty()) out += '\n';
        out += est.ingredient.name + ": " + std::to_string(engine::round_half_up(est.kcal)) + " kcal" + flag_suffix(est.flags);
        if (want_evidence) out += " (evidence: " + evidence_ids(report.evidence[i]) + ")";
    }
    if (!out.empty()) return out;

    if (want_evidence) {
        for (std::size_t i = 0; i < report.estimates.size(); ++i) {
            if (!out.empty()) out += '\n';
            out += report.estimates[i].ingredient.name + ": " + evidence_ids(report.evidence[i]);
        }
        return out;
    }
    if (contains_any(q, {"total", "calorie", "kcal", "energy"})) {
        return "TOTAL: " + std::to_string(engine::round_half_up(report.total_kcal)) + " kcal";
    }
    if (contains_any(q, {"ingredient", "what is in", "what's in"})) {
        for (const auto& est : report.estimates) {
            if (!out.empty()) out += '\n';
            out += est.ingredient.name + ": " + text::format_fixed(est.grams, 1) + " g";
        }
        return out;
    }
    return analysis.final_answer;
}

std::string chat_turn(ChatSession& session, std::string_view user_text, const Image* image, const PipelineDeps& deps) {
    if (!session.turns().empty() && session.turns().back().role == Role::user) {
        throw ArgumentError("session " + session.id() + ": previous user turn has no reply");
    }
    std::string answer;
    std::optional<std::string> digest;
    std::optional<AnalysisResult> analysis;
    if (image) {
        digest = image->digest();
        analysis = analyze_image(*image, deps.backend, deps.index, deps.kb, deps.config);
        answer = analysis->final_answer;
    } else if (!session.last_analysis()) {
        answer = std::string(kNoAnalysisMessage);
    } else if (deps.config.followup == FollowupMode::forward && session.last_image()) {
        const Image& last = *session.last_image();
        std::string instruction = "Nutrition context: " + retrieval_context(*session.last_analysis()) +
                                  ". Question: " + std::string(text::trim(user_text));
        PromptEnvelope prompt{build_prompt(TaskIdentifier::vqa, instruction), last.bytes, last.media_type,
                              deps.config.max_tokens};
        answer = deps.backend.generate(prompt);
    } else {
        answer = answer_followup(*session.last_analysis(), user_text);
    }

    session.append(Role::user, std::string(user_text), digest);
    session.append(Role::assistant, answer);
    if (analysis) session.remember(std::move(*analysis), *image);
    return answer;
}

}  // namespace caloraify::vlm
