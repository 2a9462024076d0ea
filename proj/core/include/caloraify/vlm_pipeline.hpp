#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "caloraify/calorie_engine.hpp"
#include "caloraify/ingredient_parser.hpp"
#include "caloraify/nutrition_kb.hpp"
#include "caloraify/retrieval.hpp"

namespace caloraify::vlm {

enum class TaskIdentifier { vqa, grounding };

std::string_view to_string(TaskIdentifier task);

inline constexpr std::string_view kDefaultStage1Question =
    "What ingredients and quantities are required for this recipe?";
inline constexpr std::string_view kNoIngredientsMessage =
    "Sorry, I could not identify any ingredients in this image.";
inline constexpr std::string_view kNoAnalysisMessage =
    "Please send a photo of your meal first, then I can answer questions about its ingredients and calories.";

/// `[INST]<Img><ImageHere></Img>[{task}] {instruction} [/INST]`, instruction trimmed.
/// Throws ArgumentError when the instruction is blank.
std::string build_prompt(TaskIdentifier task, std::string_view instruction);

/// Owned image bytes plus media type (e.g. "image/png").
struct Image {
    std::vector<std::uint8_t> bytes;
    std::string media_type;

    /// SHA-256 of the raw bytes, lowercase hex.
    std::string digest() const;
};

struct PromptEnvelope {
    std::string text;
    std::span<const std::uint8_t> image_bytes;
    std::string_view media_type;
    int max_tokens = 512;
};

class VlmBackend {
public:
    virtual ~VlmBackend() = default;
    /// Must tolerate concurrent calls.
    virtual std::string generate(const PromptEnvelope& prompt) = 0;
    virtual std::string_view mode() const = 0;
};

/// Deterministic backend keyed by image digest.
class StubBackend final : public VlmBackend {
public:
    StubBackend(std::unordered_map<std::string, std::string> responses, std::string default_response = {});

    /// Reads line-delimited JSON `{"digest": hex, "response": string}`.
    static StubBackend from_fixture(std::istream& in, std::string default_response = {});
    static StubBackend from_fixture_file(const std::string& path, std::string default_response = {});

    std::string generate(const PromptEnvelope& prompt) override;
    std::string_view mode() const override { return "stub"; }

    std::size_t size() const noexcept { return responses_.size(); }

private:
    std::unordered_map<std::string, std::string> responses_;
    std::string default_response_;
};

struct HttpBackendConfig {
    std::string endpoint;
    int timeout_ms = 30000;
    int retries = 2;
};

/// POST {"prompt", "image_b64", "media_type", "max_tokens"} -> {"text"}.
class HttpBackend final : public VlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string generate(const PromptEnvelope& prompt) override;
    std::string_view mode() const override { return "http"; }

private:
    HttpBackendConfig config_;
};

enum class FollowupMode {
    templated,  ///< answer from the stored report
    forward,    ///< send the question plus retrieval context to the backend
};

struct PipelineConfig {
    std::string stage1_question = std::string(kDefaultStage1Question);
    engine::EstimateConfig estimate;
    int max_tokens = 512;
    FollowupMode followup = FollowupMode::templated;
    // Adapter provenance only; nothing reads these at inference time.
    int lora_rank = 64;
    int lora_alpha = 16;
};

struct AnalysisResult {
    std::string stage1_text;
    std::vector<parser::ParsedIngredient> parsed;
    engine::CalorieReport report;
    std::string final_answer;

    bool operator==(const AnalysisResult&) const = default;
};

/// Stage 1 asks the backend for ingredients, stage 2 grounds them against the knowledge base.
/// `instruction` overrides the configured stage-1 question when non-empty.
AnalysisResult analyze_image(const Image& image, VlmBackend& backend, const retrieval::VectorIndex& index,
                             const kb::KnowledgeBase& kb, const PipelineConfig& config,
                             std::string_view instruction = {});

enum class Role { user, assistant };

std::string_view to_string(Role role);

struct Turn {
    Role role = Role::user;
    std::string text;
    std::optional<std::string> image_digest;
};

/// Conversation with strictly alternating roles, starting with the user.
class ChatSession {
public:
    explicit ChatSession(std::string session_id);

    const std::string& id() const noexcept { return id_; }
    std::chrono::system_clock::time_point created_at() const noexcept { return created_at_; }
    const std::vector<Turn>& turns() const noexcept { return turns_; }

    /// Throws ArgumentError when `role` would repeat the previous turn's role.
    void append(Role role, std::string text, std::optional<std::string> image_digest = std::nullopt);

    const std::optional<AnalysisResult>& last_analysis() const noexcept { return last_analysis_; }
    const std::optional<Image>& last_image() const noexcept { return last_image_; }
    void remember(AnalysisResult analysis, Image image);

private:
    std::string id_;
    std::chrono::system_clock::time_point created_at_;
    std::vector<Turn> turns_;
    std::optional<AnalysisResult> last_analysis_;
    std::optional<Image> last_image_;
};

struct PipelineDeps {
    VlmBackend& backend;
    const retrieval::VectorIndex& index;
    const kb::KnowledgeBase& kb;
    const PipelineConfig& config;
};

/// Deterministic answer to a follow-up question over a stored analysis.
std::string answer_followup(const AnalysisResult& analysis, std::string_view question);

/// Runs one user turn and appends the user and assistant turns. On error the session is unchanged.
std::string chat_turn(ChatSession& session, std::string_view user_text, const Image* image, const PipelineDeps& deps);

}  // namespace caloraify::vlm
