#pragma once

// Minimal HTTP client used by the chat backend and the remote classifier.
// cpp-httplib stays confined to one translation unit.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace revkit::http {

struct Response {
    /// 0 when no HTTP exchange happened (connection refused, timeout, ...).
    int status = 0;
    std::string body;
    std::string transport_error;

    bool transport_failed() const { return status == 0; }
};

using Headers = std::multimap<std::string, std::string>;

/// `base_url` is scheme://host[:port]; `path` starts with '/'.
Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const Headers& headers = {}, std::chrono::seconds timeout = std::chrono::seconds{30});

Response get(const std::string& base_url, const std::string& path, const Headers& headers = {},
             std::chrono::seconds timeout = std::chrono::seconds{30});

/// Splits "http://host:port/some/path" into ("http://host:port", "/some/path").
std::pair<std::string, std::string> split_url(const std::string& url);

struct Request {
    std::string method;
    std::string path;
    std::string body;
    Headers headers;
    /// Regex capture groups of the matched route (index 0 is the whole path).
    std::vector<std::string> matches;

    std::string header(const std::string& name) const;
};

struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

using Handler = std::function<Reply(const Request&)>;

/// Threaded HTTP server. Routes are regular expressions over the path.
class Server {
public:
    Server();
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void post(const std::string& pattern, Handler handler);
    void get(const std::string& pattern, Handler handler);

    /// Binds to an ephemeral port and returns it, or -1.
    int bind_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Blocks serving requests until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace revkit::http
