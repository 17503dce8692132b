#include "revkit/http.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace revkit::http {

namespace {

httplib::Headers to_httplib(const Headers& headers)
{
    httplib::Headers out;
    for (const auto& [k, v] : headers)
        out.emplace(k, v);
    return out;
}

Response convert(const httplib::Result& result)
{
    Response r;
    if (!result) {
        r.transport_error = httplib::to_string(result.error());
        return r;
    }
    r.status = result->status;
    r.body = result->body;
    return r;
}

void configure(httplib::Client& client, std::chrono::seconds timeout)
{
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
}

}  // namespace

Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const Headers& headers, std::chrono::seconds timeout)
{
    httplib::Client client(base_url);
    configure(client, timeout);
    return convert(client.Post(path, to_httplib(headers), body, "application/json"));
}

Response get(const std::string& base_url, const std::string& path, const Headers& headers,
             std::chrono::seconds timeout)
{
    httplib::Client client(base_url);
    configure(client, timeout);
    return convert(client.Get(path, to_httplib(headers)));
}

std::pair<std::string, std::string> split_url(const std::string& url)
{
    auto scheme = url.find("://");
    auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string Request::header(const std::string& name) const
{
    for (const auto& [k, v] : headers) {
        if (k.size() != name.size())
            continue;
        bool same = true;
        for (std::size_t i = 0; i < k.size() && same; ++i)
            same = std::tolower(static_cast<unsigned char>(k[i])) == std::tolower(static_cast<unsigned char>(name[i]));
        if (same)
            return v;
    }
    return {};
}

struct Server::Impl {
    httplib::Server server;
};

namespace {

httplib::Server::Handler adapt(Handler handler)
{
    return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
        Request r;
        r.method = req.method;
        r.path = req.path;
        r.body = req.body;
        for (const auto& [k, v] : req.headers)
            r.headers.emplace(k, v);
        for (const auto& m : req.matches)
            r.matches.push_back(m.str());
        Reply reply;
        try {
            reply = handler(r);
        } catch (const std::exception&) {
            reply = {500, std::string("{\"error\":\"internal\"}"), "application/json"};
        }
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type.c_str());
    };
}

}  // namespace

Server::Server() : impl_(std::make_unique<Impl>()) {}
Server::~Server() { stop(); }

void Server::post(const std::string& pattern, Handler handler) { impl_->server.Post(pattern, adapt(std::move(handler))); }
void Server::get(const std::string& pattern, Handler handler) { impl_->server.Get(pattern, adapt(std::move(handler))); }

int Server::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Server::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool Server::listen_after_bind() { return impl_->server.listen_after_bind(); }
void Server::stop()
{
    if (impl_)
        impl_->server.stop();
}
void Server::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace revkit::http
