#include "http_endpoint.hpp"

#include <httplib.h>

#include "caloraify/error.hpp"

namespace caloraify::detail {

Endpoint parse_endpoint(std::string_view url) {
    std::size_t scheme = url.find("://");
    std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
    std::size_t slash = url.find('/', host_start);
    if (url.substr(host_start, slash == std::string_view::npos ? url.size() : slash - host_start).empty()) {
        throw ArgumentError("endpoint URL has no host: '" + std::string(url) + "'");
    }
    if (slash == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

std::string post_json(const std::string& url, const std::string& body, int timeout_ms, int retries) {
    const Endpoint ep = parse_endpoint(url);
    httplib::Client client(ep.origin);
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    const int attempts = 1 + std::max(0, retries);
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto res = client.Post(ep.path, body, "application/json");
        if (!res) {
            last_error = "POST " + url + " failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        last_error = "POST " + url + " returned HTTP " + std::to_string(res->status);
    }
    throw TransportError(last_error, attempts);
}

}  // namespace caloraify::detail
