#pragma once

// Deterministic scripted stand-in for the three model services.
//
// Fixture file (JSON):
//   {
//     "aesthetic": {
//       "script":   [{"status": 503}, {"status": 200, "body": {"score": 7.2}}],
//       "by_image": {"<content-id hex>": {"body": {"score": 4.0}}},
//       "default":  {"body": {"score": 5.1}}
//     },
//     "caption": {...}, "ground": {...}
//   }
// Each request is answered by the next unused script entry, else the entry
// for the image's content id, else the default, else 404. A response may
// give "raw" text instead of a JSON "body", and a "delay_ms". The string
// "{id}" inside a body is replaced with the image's content id.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace condforge {

struct MockResponse {
  int status = 200;
  nlohmann::json body;
  std::optional<std::string> raw;
  int delay_ms = 0;
};

struct MockRoute {
  std::vector<MockResponse> script;
  std::map<std::string, MockResponse> by_image;
  std::optional<MockResponse> fallback;
};

struct MockFixtures {
  MockRoute aesthetic;
  MockRoute caption;
  MockRoute ground;

  static MockFixtures from_json(const nlohmann::json& j);
  static MockFixtures load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct MockRequest {
  std::string route;
  /// Content id of the decoded "image" field; empty if absent or malformed.
  std::string image_id;
};

class MockServer {
 public:
  explicit MockServer(MockFixtures fixtures);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds 127.0.0.1; port 0 picks a free port. Returns the bound port.
  int start(int port = 0);
  void stop();
  /// Blocks serving until stop() (for the CLI).
  void serve_forever(int port);

  int port() const;
  std::string base_url() const;

  /// Replaces a route's fixtures and rewinds its script.
  void set_route(const std::string& route, MockRoute fixtures);
  std::vector<MockRequest> requests() const;
  int request_count(const std::string& route) const;
  void reset_log();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace condforge
