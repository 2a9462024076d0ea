#include "caloraify/service.hpp"

#include <httplib.h>

#include <chrono>
#include <random>
#include <semaphore>

#include "caloraify/digest.hpp"
#include "caloraify/error.hpp"
#include "caloraify/json_codec.hpp"
#include "caloraify/text.hpp"

namespace caloraify::service {

using nlohmann::json;

std::string_view to_string(VlmMode mode) { return mode == VlmMode::stub ? "stub" : "http"; }

VlmMode parse_vlm_mode(std::string_view s) {
    if (text::iequals(s, "stub")) return VlmMode::stub;
    if (text::iequals(s, "http")) return VlmMode::http;
    throw ArgumentError("vlm mode must be 'stub' or 'http', got '" + std::string(s) + "'");
}

void ServiceConfig::validate() const {
    if (max_image_bytes == 0) throw ArgumentError("max_image_bytes must be > 0");
    if (retrieval_k < 1) throw ArgumentError("retrieval_k must be >= 1");
    if (vlm_mode == VlmMode::http && vlm_endpoint.empty()) throw ArgumentError("vlm_mode=http requires vlm_endpoint");
    if (session_capacity == 0) throw ArgumentError("session_capacity must be > 0");
    if (vlm_concurrency == 0) throw ArgumentError("vlm_concurrency must be > 0");
    if (port < 0 || port > 65535) throw ArgumentError("port out of range");
}

std::string ServiceConfig::digest() const {
    json j = {
        {"kb_path", kb_path},
        {"vlm_mode", to_string(vlm_mode)},
        {"vlm_endpoint", vlm_endpoint},
        {"stub_fixture_path", stub_fixture_path},
        {"retrieval_k", retrieval_k},
        {"min_score", min_score},
        {"lambda_rouge", lambda_rouge},
        {"lambda_bleu", lambda_bleu},
        {"request_timeout_ms", request_timeout_ms},
        {"max_image_bytes", max_image_bytes},
        {"session_capacity", session_capacity},
    };
    return sha256_hex(j.dump());
}

SessionStore::SessionStore(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ArgumentError("session capacity must be > 0");
}

std::shared_ptr<SessionSlot> SessionStore::create() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex_);
    std::string id;
    do {
        std::array<std::uint8_t, 16> raw{};
        for (auto& b : raw) b = static_cast<std::uint8_t>(rng());
        id = sha256_hex(std::span<const std::uint8_t>(raw)).substr(0, 32);
    } while (by_id_.contains(id));

    auto slot = std::make_shared<SessionSlot>(id);
    lru_.push_front(slot);
    by_id_[id] = lru_.begin();
    while (lru_.size() > capacity_) {
        by_id_.erase(lru_.back()->session.id());
        lru_.pop_back();
    }
    return slot;
}

std::shared_ptr<SessionSlot> SessionStore::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return nullptr;
    lru_.splice(lru_.begin(), lru_, it->second);
    return *it->second;
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mutex_);
    return lru_.size();
}

std::shared_ptr<Runtime> load_runtime(const ServiceConfig& config) {
    config.validate();
    auto rt = std::make_shared<Runtime>();
    rt->kb = kb::load_file(config.kb_path);
    rt->index = retrieval::build_index(rt->kb, std::make_shared<retrieval::HashingEmbedder>());
    if (config.vlm_mode == VlmMode::stub) {
        if (config.stub_fixture_path.empty()) {
            rt->backend = std::make_unique<vlm::StubBackend>(std::unordered_map<std::string, std::string>{},
                                                             config.stub_default_response);
        } else {
            rt->backend = std::make_unique<vlm::StubBackend>(
                vlm::StubBackend::from_fixture_file(config.stub_fixture_path, config.stub_default_response));
        }
    } else {
        rt->backend = std::make_unique<vlm::HttpBackend>(
            vlm::HttpBackendConfig{config.vlm_endpoint, config.request_timeout_ms, config.vlm_retries});
    }
    return rt;
}

namespace {

constexpr const char* kJson = "application/json";

bool allowed_media_type(std::string_view media_type) {
    const std::string t = text::to_lower(text::trim(media_type.substr(0, media_type.find(';'))));
    return t == "image/jpeg" || t == "image/jpg" || t == "image/png" || t == "image/webp";
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), kJson);
}

// Limits concurrent calls into the shared backend.
class BoundedBackend final : public vlm::VlmBackend {
public:
    BoundedBackend(vlm::VlmBackend& inner, std::counting_semaphore<>& slots) : inner_(inner), slots_(slots) {}

    std::string generate(const vlm::PromptEnvelope& prompt) override {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};
        return inner_.generate(prompt);
    }
    std::string_view mode() const override { return inner_.mode(); }

private:
    vlm::VlmBackend& inner_;
    std::counting_semaphore<>& slots_;
};

}  // namespace

struct Service::Impl {
    Impl(ServiceConfig cfg, std::ostream* log)
        : config(std::move(cfg)),
          sessions(config.session_capacity),
          vlm_slots(static_cast<std::ptrdiff_t>(config.vlm_concurrency)),
          request_log(log) {
        config.validate();
        pipeline.estimate.k = config.retrieval_k;
        pipeline.estimate.min_score = config.min_score;
        pipeline.followup = config.vlm_mode == VlmMode::http ? vlm::FollowupMode::forward : vlm::FollowupMode::templated;
        routes();
    }

    std::shared_ptr<Runtime> runtime() const {
        std::lock_guard lock(runtime_mutex);
        return rt;
    }

    void routes() {
        // Multipart overhead on top of the image itself.
        server.set_payload_max_length(config.max_image_bytes + 64 * 1024);
        server.set_read_timeout(std::chrono::milliseconds(config.request_timeout_ms));
        server.set_write_timeout(std::chrono::milliseconds(config.request_timeout_ms));

        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { healthz(res); });
        server.Get("/v1/kb/search", [this](const httplib::Request& req, httplib::Response& res) { search(req, res); });
        server.Post("/v1/analyze", [this](const httplib::Request& req, httplib::Response& res) { analyze(req, res); });
        server.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) { chat(req, res); });

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            std::string message = res.status == 413 ? "payload too large" : httplib::status_message(res.status);
            res.set_content(json{{"error", message}}.dump(), kJson);
            return httplib::Server::HandlerResponse::Handled;
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            send_error(res, 500, message);
        });
        server.set_logger([this](const httplib::Request& req, const httplib::Response& res) { log(req, res); });
    }

    void log(const httplib::Request& req, const httplib::Response& res) {
        if (!request_log) return;
        const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch()).count();
        json line = {{"ts_ms", now},
                     {"method", req.method},
                     {"path", req.path},
                     {"status", res.status},
                     {"request_bytes", req.body.size()},
                     {"response_bytes", res.body.size()}};
        std::lock_guard lock(log_mutex);
        *request_log << line.dump() << '\n';
        request_log->flush();
    }

    void healthz(httplib::Response& res) {
        auto current = runtime();
        if (!current) {
            res.status = 503;
            res.set_content(json{{"status", "loading"}, {"vlm_mode", to_string(config.vlm_mode)}}.dump(), kJson);
            return;
        }
        res.set_content(json{{"status", "ok"},
                             {"kb_digest", current->kb.source_digest()},
                             {"vlm_mode", to_string(config.vlm_mode)},
                             {"config_digest", config.digest()},
                             {"record_count", current->kb.record_count()},
                             {"max_image_bytes", config.max_image_bytes}}
                            .dump(),
                        kJson);
    }

    void search(const httplib::Request& req, httplib::Response& res) {
        const std::string q = req.has_param("q") ? req.get_param_value("q") : std::string();
        if (text::trim(q).empty()) return send_error(res, 400, "missing query parameter 'q'");
        std::size_t k = config.retrieval_k;
        if (req.has_param("k")) {
            double parsed = 0.0;
            if (!text::parse_double(req.get_param_value("k"), parsed) || parsed < 1 || parsed != std::floor(parsed)) {
                return send_error(res, 400, "k must be an integer >= 1");
            }
            k = static_cast<std::size_t>(parsed);
        }
        auto current = runtime();
        if (!current) return send_error(res, 500, "knowledge base not loaded");
        try {
            res.set_content(json(current->index->search(q, k)).dump(), kJson);
        } catch (const ArgumentError& e) {
            send_error(res, 400, e.what());
        }
    }

    void analyze(const httplib::Request& req, httplib::Response& res) {
        auto current = runtime();
        if (!current) return send_error(res, 503, "service is loading");
        if (!req.is_multipart_form_data() || !req.has_file("image")) {
            return send_error(res, 400, "expected multipart/form-data with an 'image' part");
        }
        const auto file = req.get_file_value("image");
        if (file.content.size() > config.max_image_bytes) {
            return send_error(res, 413, "image exceeds " + std::to_string(config.max_image_bytes) + " bytes");
        }
        if (!allowed_media_type(file.content_type)) {
            return send_error(res, 415, "unsupported media type '" + file.content_type + "'");
        }
        if (file.content.empty()) return send_error(res, 400, "image is empty");
        const std::string instruction = req.has_file("instruction") ? req.get_file_value("instruction").content : std::string();

        vlm::Image image{std::vector<std::uint8_t>(file.content.begin(), file.content.end()), file.content_type};
        BoundedBackend backend(*current->backend, vlm_slots);
        try {
            auto result = vlm::analyze_image(image, backend, *current->index, current->kb, pipeline, instruction);
            res.status = result.parsed.empty() ? 422 : 200;
            res.set_content(json(result).dump(), kJson);
        } catch (const TransportError& e) {
            send_error(res, 502, e.what());
        } catch (const ArgumentError& e) {
            send_error(res, 400, e.what());
        }
    }

    void chat(const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "request body must be JSON");
        }
        if (!body.is_object()) return send_error(res, 400, "request body must be a JSON object");

        std::string text_in, session_id, image_b64, media_type = "image/jpeg";
        try {
            text_in = body.value("text", std::string());
            session_id = body.contains("session_id") && !body["session_id"].is_null() ? body["session_id"].get<std::string>() : "";
            image_b64 = body.contains("image_b64") && !body["image_b64"].is_null() ? body["image_b64"].get<std::string>() : "";
            media_type = body.value("media_type", media_type);
        } catch (const json::exception&) {
            return send_error(res, 400, "fields have the wrong type");
        }
        if (text::trim(text_in).empty() && image_b64.empty()) return send_error(res, 400, "empty turn: send text or an image");

        std::optional<vlm::Image> image;
        if (!image_b64.empty()) {
            if (image_b64.size() / 4 * 3 > config.max_image_bytes + 3) {
                return send_error(res, 413, "image exceeds " + std::to_string(config.max_image_bytes) + " bytes");
            }
            if (!allowed_media_type(media_type)) return send_error(res, 415, "unsupported media type '" + media_type + "'");
            try {
                image = vlm::Image{base64_decode(image_b64), media_type};
            } catch (const InputError& e) {
                return send_error(res, 400, e.what());
            }
            if (image->bytes.size() > config.max_image_bytes) {
                return send_error(res, 413, "image exceeds " + std::to_string(config.max_image_bytes) + " bytes");
            }
            if (image->bytes.empty()) return send_error(res, 400, "image is empty");
        }

        auto current = runtime();
        if (!current) return send_error(res, 503, "service is loading");

        std::shared_ptr<SessionSlot> slot;
        if (!session_id.empty()) {
            slot = sessions.find(session_id);
            if (!slot) return send_error(res, 404, "unknown session '" + session_id + "'");
        } else {
            slot = sessions.create();
        }

        BoundedBackend backend(*current->backend, vlm_slots);
        vlm::PipelineDeps deps{backend, *current->index, current->kb, pipeline};
        std::lock_guard lock(slot->mutex);
        try {
            std::string answer = vlm::chat_turn(slot->session, text_in, image ? &*image : nullptr, deps);
            res.set_content(json{{"session_id", slot->session.id()}, {"assistant_text", answer}}.dump(), kJson);
        } catch (const TransportError& e) {
            send_error(res, 502, e.what());
        } catch (const ArgumentError& e) {
            send_error(res, 409, e.what());
        }
    }

    ServiceConfig config;
    vlm::PipelineConfig pipeline;
    SessionStore sessions;
    std::counting_semaphore<> vlm_slots;
    httplib::Server server;
    std::ostream* request_log;
    std::mutex log_mutex;
    mutable std::mutex runtime_mutex;
    std::shared_ptr<Runtime> rt;
};

Service::Service(ServiceConfig config, std::ostream* request_log)
    : impl_(std::make_unique<Impl>(std::move(config), request_log)) {}

Service::~Service() { stop(); }

void Service::set_runtime(std::shared_ptr<Runtime> runtime) {
    std::lock_guard lock(impl_->runtime_mutex);
    impl_->rt = std::move(runtime);
}

bool Service::ready() const { return impl_->runtime() != nullptr; }

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_listening() const { impl_->server.wait_until_ready(); }

SessionStore& Service::sessions() { return impl_->sessions; }

const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace caloraify::service
