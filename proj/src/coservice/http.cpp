#include <atomic>

#include "httplib.h"
#include "mrin/coservice.hpp"

namespace mrin {
namespace {

std::atomic<httplib::Server*> g_server{nullptr};

}  // namespace

void serve_http(CoService& service, const std::string& host, int port,
                const std::function<void(int)>& on_ready) {
  httplib::Server server;
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto reply = service.handle(req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server.Get(R"(/.*)", forward);
  server.Post(R"(/.*)", forward);
  server.Put(R"(/.*)", forward);
  server.Delete(R"(/.*)", forward);

  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoFailure("cannot bind " + host + ":" + std::to_string(port));
  g_server.store(&server);
  if (on_ready) on_ready(bound);
  server.listen_after_bind();
  g_server.store(nullptr);
}

void stop_server() {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace mrin
