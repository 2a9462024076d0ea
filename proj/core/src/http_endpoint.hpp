#pragma once

#include <string>
#include <string_view>

namespace caloraify::detail {

/// `http://host:port/path` split into the scheme/host/port part and the request path.
struct Endpoint {
    std::string origin;
    std::string path;
};

Endpoint parse_endpoint(std::string_view url);

/// POSTs a JSON body and returns the 2xx response body. Makes 1 + `retries` attempts, then throws
/// TransportError. Non-2xx responses count as failed attempts.
std::string post_json(const std::string& url, const std::string& body, int timeout_ms, int retries);

}  // namespace caloraify::detail
