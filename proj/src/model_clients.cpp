#include "condforge/model_clients.hpp"

#include <httplib.h>

#include <algorithm>
#include <json.hpp>
#include <semaphore>
#include <thread>

#include "condforge/content_hash.hpp"

namespace condforge {
namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

json parse_body(const std::string& route, const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    throw ProtocolError(route + ": reply is not JSON");
  }
}

double number_field(const json& obj, const std::string& route, const std::string& field) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw ProtocolError(route + ": missing field '" + field + "'");
  if (!it->is_number()) throw ProtocolError(route + ": field '" + field + "' is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ProtocolError(route + ": field '" + field + "' is not finite");
  return v;
}

std::string string_field(const json& obj, const std::string& route, const std::string& field) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw ProtocolError(route + ": missing field '" + field + "'");
  if (!it->is_string()) throw ProtocolError(route + ": field '" + field + "' is not a string");
  return it->get<std::string>();
}

std::string image_body(std::span<const std::uint8_t> bytes, json extra = json::object()) {
  extra["image"] = base64_encode(bytes);
  return extra.dump();
}

}  // namespace

struct ModelClient::Impl {
  explicit Impl(int cap) : slots(cap) {}
  std::counting_semaphore<> slots;
};

void ServiceEndpoint::validate() const {
  if (base_url.empty()) throw Error("endpoint base_url is empty");
  if (timeout.count() <= 0) throw Error("endpoint timeout must be positive");
  if (max_retries < 0) throw Error("endpoint max_retries must be >= 0");
  if (backoff_base.count() < 0) throw Error("endpoint backoff_base must be >= 0");
  if (max_concurrency < 1) throw Error("endpoint max_concurrency must be >= 1");
  parse_url(base_url);
}

ModelClient::ModelClient(ServiceEndpoint endpoint, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), sleeper_(std::move(sleeper)) {
  endpoint_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  impl_ = std::make_unique<Impl>(endpoint_.max_concurrency);
}

ModelClient::~ModelClient() = default;
ModelClient::ModelClient(ModelClient&&) noexcept = default;
ModelClient& ModelClient::operator=(ModelClient&&) noexcept = default;

std::chrono::milliseconds ModelClient::backoff_delay(std::chrono::milliseconds base, int retry) {
  return base * (std::int64_t{1} << std::min(retry, 30));
}

std::string ModelClient::post(const std::string& route, const std::string& body, CallTrace* trace) const {
  const auto url = parse_url(endpoint_.base_url);
  const std::string path = url.prefix + route;
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = backoff_delay(endpoint_.backoff_base, attempt - 1);
      if (trace) trace->delays.push_back(delay);
      sleeper_(delay);
    }
    if (trace) ++trace->attempts;

    httplib::Result res;
    {
      impl_->slots.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{impl_->slots};
      httplib::Client client(url.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (!endpoint_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.bearer_token);
      res = client.Post(path, headers, body, "application/json");
    }

    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw RemoteRejected(route + ": HTTP " + std::to_string(res->status) + " " + res->body, res->status);
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProtocolError(route + ": unexpected HTTP status " + std::to_string(res->status));
    }
    return res->body;
  }
  throw RemoteUnavailable(route + ": " + last_error + " after " + std::to_string(endpoint_.max_retries + 1) +
                          " attempt(s)");
}

double ModelClient::score_aesthetic(std::span<const std::uint8_t> image_bytes, CallTrace* trace) const {
  const std::string route = "/aesthetic";
  const auto reply = parse_body(route, post(route, image_body(image_bytes), trace));
  if (!reply.is_object()) throw ProtocolError(route + ": reply is not an object");
  return number_field(reply, route, "score");
}

CaptionPair ModelClient::caption(std::span<const std::uint8_t> image_bytes, CallTrace* trace) const {
  const std::string route = "/caption";
  const auto reply = parse_body(route, post(route, image_body(image_bytes), trace));
  if (!reply.is_object()) throw ProtocolError(route + ": reply is not an object");
  CaptionPair pair{string_field(reply, route, "short"), string_field(reply, route, "detailed")};
  if (pair.short_caption.empty()) throw ProtocolError(route + ": field 'short' is empty");
  if (pair.detailed_caption.empty()) throw ProtocolError(route + ": field 'detailed' is empty");
  return pair;
}

std::vector<GroundedBox> ModelClient::ground(std::span<const std::uint8_t> image_bytes,
                                             const std::string& detailed_caption, double box_threshold,
                                             std::vector<std::string>* warnings, CallTrace* trace) const {
  if (!(box_threshold >= 0.0 && box_threshold <= 1.0)) throw Error("box_threshold must be within [0, 1]");
  const std::string route = "/ground";
  const auto body = image_body(image_bytes, {{"caption", detailed_caption}, {"box_threshold", box_threshold}});
  const auto reply = parse_body(route, post(route, body, trace));
  if (!reply.is_object()) throw ProtocolError(route + ": reply is not an object");
  const auto it = reply.find("boxes");
  if (it == reply.end()) throw ProtocolError(route + ": missing field 'boxes'");
  if (!it->is_array()) throw ProtocolError(route + ": field 'boxes' is not a list");

  std::vector<GroundedBox> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& entry = (*it)[i];
    const std::string where = route + " boxes[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw ProtocolError(where + ": not an object");
    GroundedBox g;
    g.confidence = number_field(entry, where, "confidence");
    if (g.confidence < 0.0 || g.confidence > 1.0) throw ProtocolError(where + ": confidence outside [0, 1]");
    if (entry.contains("phrase")) g.phrase = string_field(entry, where, "phrase");
    g.box.x0 = std::clamp(number_field(entry, where, "x0"), 0.0, 1.0);
    g.box.y0 = std::clamp(number_field(entry, where, "y0"), 0.0, 1.0);
    g.box.x1 = std::clamp(number_field(entry, where, "x1"), 0.0, 1.0);
    g.box.y1 = std::clamp(number_field(entry, where, "y1"), 0.0, 1.0);
    g.box.label = g.phrase;
    if (g.confidence < box_threshold) continue;
    if (!g.box.valid()) {
      if (warnings) warnings->push_back(where + ": degenerate box dropped");
      continue;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace condforge
