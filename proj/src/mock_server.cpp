#include "condforge/mock_server.hpp"

#include <httplib.h>

#include <fstream>
#include <mutex>
#include <thread>

#include "condforge/content_hash.hpp"
#include "condforge/error.hpp"

namespace condforge {
namespace {

using nlohmann::json;

const std::array<std::string, 3> kRoutes{"aesthetic", "caption", "ground"};

MockResponse response_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error("mock fixture " + where + ": expected an object");
  MockResponse r;
  for (const auto& [key, value] : j.items()) {
    if (key == "status") {
      r.status = value.get<int>();
    } else if (key == "body") {
      r.body = value;
    } else if (key == "raw") {
      r.raw = value.get<std::string>();
    } else if (key == "delay_ms") {
      r.delay_ms = value.get<int>();
    } else {
      throw Error("mock fixture " + where + ": unknown field '" + key + "'");
    }
  }
  return r;
}

json response_to_json(const MockResponse& r) {
  json j{{"status", r.status}};
  if (r.raw) {
    j["raw"] = *r.raw;
  } else if (!r.body.is_null()) {
    j["body"] = r.body;
  }
  if (r.delay_ms) j["delay_ms"] = r.delay_ms;
  return j;
}

void substitute_id(json& j, const std::string& id) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    for (auto pos = s.find("{id}"); pos != std::string::npos; pos = s.find("{id}", pos + id.size())) {
      s.replace(pos, 4, id);
    }
    j = s;
  } else if (j.is_structured()) {
    for (auto& child : j) substitute_id(child, id);
  }
}

}  // namespace

static MockRoute route_from_json(const json& spec, const std::string& name) {
  if (!spec.is_object()) throw Error("mock fixtures: route '" + name + "' is not an object");
  MockRoute route;
  for (const auto& [key, value] : spec.items()) {
    const std::string where = name + "." + key;
    if (key == "script") {
      for (std::size_t i = 0; i < value.size(); ++i) {
        route.script.push_back(response_from_json(value[i], where + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "by_image") {
      for (const auto& [id, r] : value.items()) route.by_image[id] = response_from_json(r, where + "." + id);
    } else if (key == "default") {
      route.fallback = response_from_json(value, where);
    } else {
      throw Error("mock fixtures: unknown field '" + where + "'");
    }
  }
  return route;
}

MockFixtures MockFixtures::from_json(const json& j) {
  if (!j.is_object()) throw Error("mock fixtures: expected an object");
  MockFixtures out;
  for (const auto& [name, spec] : j.items()) {
    if (name == "aesthetic") {
      out.aesthetic = route_from_json(spec, name);
    } else if (name == "caption") {
      out.caption = route_from_json(spec, name);
    } else if (name == "ground") {
      out.ground = route_from_json(spec, name);
    } else {
      throw Error("mock fixtures: unknown route '" + name + "'");
    }
  }
  return out;
}

MockFixtures MockFixtures::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock fixtures " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("mock fixtures " + path.string() + ": " + e.what());
  }
}

json MockFixtures::to_json() const {
  json out = json::object();
  const std::array<std::pair<const char*, const MockRoute*>, 3> routes{
      {{"aesthetic", &aesthetic}, {"caption", &caption}, {"ground", &ground}}};
  for (const auto& [name, route] : routes) {
    json r = json::object();
    if (!route->script.empty()) {
      r["script"] = json::array();
      for (const auto& s : route->script) r["script"].push_back(response_to_json(s));
    }
    if (!route->by_image.empty()) {
      r["by_image"] = json::object();
      for (const auto& [id, s] : route->by_image) r["by_image"][id] = response_to_json(s);
    }
    if (route->fallback) r["default"] = response_to_json(*route->fallback);
    out[name] = r;
  }
  return out;
}

struct MockServer::Impl {
  mutable std::mutex mu;
  std::map<std::string, MockRoute> routes;
  std::map<std::string, std::size_t> cursor;
  std::vector<MockRequest> log;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  std::optional<MockResponse> pick(const std::string& route, const std::string& image_id) {
    std::lock_guard lock(mu);
    log.push_back({route, image_id});
    auto& r = routes[route];
    auto& c = cursor[route];
    if (c < r.script.size()) return r.script[c++];
    if (auto it = r.by_image.find(image_id); it != r.by_image.end()) return it->second;
    return r.fallback;
  }

  void install() {
    for (const auto& name : kRoutes) {
      server.Post("/" + name, [this, name](const httplib::Request& req, httplib::Response& res) {
        std::string image_id;
        try {
          const auto body = json::parse(req.body);
          if (body.contains("image") && body["image"].is_string()) {
            image_id = content_id(base64_decode(body["image"].get<std::string>())).hex();
          }
        } catch (const std::exception&) {
          image_id.clear();
        }
        const auto reply = pick(name, image_id);
        if (!reply) {
          res.status = 404;
          res.set_content("no fixture for " + name, "text/plain");
          return;
        }
        if (reply->delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(reply->delay_ms));
        res.status = reply->status;
        if (reply->raw) {
          res.set_content(*reply->raw, "text/plain");
        } else if (!reply->body.is_null()) {
          auto body = reply->body;
          substitute_id(body, image_id);
          res.set_content(body.dump(), "application/json");
        }
      });
    }
  }
};

MockServer::MockServer(MockFixtures fixtures) : impl_(std::make_unique<Impl>()) {
  impl_->routes["aesthetic"] = std::move(fixtures.aesthetic);
  impl_->routes["caption"] = std::move(fixtures.caption);
  impl_->routes["ground"] = std::move(fixtures.ground);
  impl_->install();
}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
  if (impl_->thread.joinable()) return impl_->port;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    impl_->port = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (impl_->port < 0) throw Error("mock server cannot bind port " + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockServer::serve_forever(int port) {
  start(port);
  impl_->thread.join();
}

void MockServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int MockServer::port() const { return impl_->port; }

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void MockServer::set_route(const std::string& route, MockRoute fixtures) {
  std::lock_guard lock(impl_->mu);
  impl_->routes[route] = std::move(fixtures);
  impl_->cursor[route] = 0;
}

std::vector<MockRequest> MockServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

int MockServer::request_count(const std::string& route) const {
  std::lock_guard lock(impl_->mu);
  int n = 0;
  for (const auto& r : impl_->log) n += r.route == route;
  return n;
}

void MockServer::reset_log() {
  std::lock_guard lock(impl_->mu);
  impl_->log.clear();
}

}  // namespace condforge
