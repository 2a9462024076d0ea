#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <unordered_map>

#include "caloraify/eval_metrics.hpp"
#include "caloraify/nutrition_kb.hpp"
#include "caloraify/retrieval.hpp"
#include "caloraify/vlm_pipeline.hpp"

namespace caloraify::service {

enum class VlmMode { stub, http };

std::string_view to_string(VlmMode mode);
VlmMode parse_vlm_mode(std::string_view s);

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string kb_path;
    VlmMode vlm_mode = VlmMode::stub;
    std::string vlm_endpoint;
    std::string stub_fixture_path;
    std::string stub_default_response;
    std::size_t retrieval_k = 3;
    double min_score = 0.35;
    double lambda_rouge = 2.5;
    double lambda_bleu = 1.5;
    int request_timeout_ms = 30000;
    int vlm_retries = 2;
    std::size_t max_image_bytes = 8 * 1024 * 1024;
    std::size_t session_capacity = 1024;
    std::size_t vlm_concurrency = 4;

    /// Throws ArgumentError when an invariant does not hold.
    void validate() const;
    /// SHA-256 over the canonical JSON form of the config.
    std::string digest() const;
};

/// A session plus the mutex that serializes its turns.
struct SessionSlot {
    explicit SessionSlot(std::string id) : session(std::move(id)) {}
    std::mutex mutex;
    vlm::ChatSession session;
};

/// Thread-safe LRU map of chat sessions.
class SessionStore {
public:
    explicit SessionStore(std::size_t capacity);

    /// Creates a session with a fresh random id, evicting the least recently used one when full.
    std::shared_ptr<SessionSlot> create();
    /// Null when the id is unknown or was evicted. Marks the session as most recently used.
    std::shared_ptr<SessionSlot> find(const std::string& id);
    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }

private:
    using Lru = std::list<std::shared_ptr<SessionSlot>>;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    Lru lru_;
    std::unordered_map<std::string, Lru::iterator> by_id_;
};

/// Everything a request needs once loading finished. Shared read-only across handlers.
struct Runtime {
    kb::KnowledgeBase kb;
    std::unique_ptr<retrieval::VectorIndex> index;
    std::unique_ptr<vlm::VlmBackend> backend;
};

/// Loads the knowledge base, builds the reference-embedder index and the configured VLM backend.
std::shared_ptr<Runtime> load_runtime(const ServiceConfig& config);

/// HTTP front end: POST /v1/analyze, POST /v1/chat, GET /v1/kb/search, GET /healthz.
class Service {
public:
    explicit Service(ServiceConfig config, std::ostream* request_log = nullptr);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Until a runtime is installed /healthz answers 503.
    void set_runtime(std::shared_ptr<Runtime> runtime);
    bool ready() const;

    /// Binds the listening socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call after bind().
    void listen();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_listening() const;

    SessionStore& sessions();
    const ServiceConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace caloraify::service
