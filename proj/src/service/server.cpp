#include <atomic>
#include <condition_variable>
#include <deque>
#include <thread>

#include <httplib.h>

#include "epolis/error.hpp"
#include "epolis/service/api.hpp"

namespace epolis::service {

namespace {

// Events queued for one open stream.
struct Stream {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> pending;
};

ApiRequest to_request(const httplib::Request& req) {
  ApiRequest r{req.method, req.path, {}, req.body};
  for (const auto& [k, v] : req.params) r.query[k] = v;
  return r;
}

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

struct Server::Impl {
  Api& api;
  std::string host;
  int port;
  httplib::Server http;
  std::thread thread;
  std::atomic<bool> stopping{false};

  Impl(Api& a, std::string h, int p) : api(a), host(std::move(h)), port(p) { routes(); }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Get(R"(/api/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.matches[1];
      if (!api.has_session(id)) {
        send(res, error_response(Error(ErrorCode::UnknownId, "no session '" + id + "'")));
        return;
      }
      auto stream = std::make_shared<Stream>();
      auto sub = api.subscribe(id, [stream](const session::PushEvent& e) {
        std::lock_guard lock(stream->mu);
        stream->pending.push_back(format_sse(e));
        stream->cv.notify_all();
      });
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, stream, first = true](std::size_t, httplib::DataSink& sink) mutable {
            if (first) {
              first = false;
              return sink.write(": connected\n\n", 13);
            }
            std::deque<std::string> out;
            {
              std::unique_lock lock(stream->mu);
              stream->cv.wait_for(lock, std::chrono::milliseconds(500),
                                  [&] { return !stream->pending.empty() || stopping.load(); });
              out.swap(stream->pending);
            }
            if (stopping) {
              sink.done();
              return true;
            }
            if (out.empty()) return sink.write(": keep-alive\n\n", 14);
            for (const auto& e : out)
              if (!sink.write(e.data(), e.size())) return false;
            return true;
          },
          [this, sub](bool) { api.unsubscribe(sub); });
    });
    auto generic = [this](const httplib::Request& req, httplib::Response& res) { send(res, api.handle(to_request(req))); };
    http.Get(".*", generic);
    http.Post(".*", generic);
    http.Put(".*", generic);
    http.Delete(".*", generic);
    http.Options(".*", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }

  int bind() {
    int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    return bound;
  }
};

Server::Server(Api& api, std::string host, int port) : impl_(std::make_unique<Impl>(api, std::move(host), port)) {}

Server::~Server() { stop(); }

int Server::start() {
  int bound = impl_->bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void Server::run() {
  impl_->bind();
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace epolis::service
