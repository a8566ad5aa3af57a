#pragma once

// HTTP clients for the aesthetic scorer, captioner and grounded detector.
//
// Wire protocol: POST {base_url}/aesthetic | /caption | /ground with a JSON
// body {"image": "<base64>", ...}; replies {"score": f},
// {"short": s, "detailed": s} and {"boxes": [{x0, y0, x1, y1, phrase, confidence}]}.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "condforge/error.hpp"
#include "condforge/record.hpp"

namespace condforge {

/// Transport failure or 5xx that survived every retry.
class RemoteUnavailable : public Error {
 public:
  using Error::Error;
};

/// 4xx reply; never retried.
class RemoteRejected : public Error {
 public:
  RemoteRejected(const std::string& message, int status) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Reply arrived but its payload is unusable.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

struct ServiceEndpoint {
  std::string base_url;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{200};
  /// Sent as "Authorization: Bearer ..." when non-empty.
  std::string bearer_token;
  /// Per-endpoint cap on in-flight requests.
  int max_concurrency = 8;

  void validate() const;
};

/// Attempts made and delays slept by one call.
struct CallTrace {
  int attempts = 0;
  std::vector<std::chrono::milliseconds> delays;
};

constexpr double kDefaultBoxThreshold = 0.35;

/// One client per endpoint; thread-safe and shareable across workers.
class ModelClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit ModelClient(ServiceEndpoint endpoint, Sleeper sleeper = {});
  ~ModelClient();
  ModelClient(ModelClient&&) noexcept;
  ModelClient& operator=(ModelClient&&) noexcept;

  const ServiceEndpoint& endpoint() const { return endpoint_; }

  double score_aesthetic(std::span<const std::uint8_t> image_bytes, CallTrace* trace = nullptr) const;
  CaptionPair caption(std::span<const std::uint8_t> image_bytes, CallTrace* trace = nullptr) const;
  /// Boxes at or above `box_threshold`, clipped to [0, 1]. Boxes that are
  /// empty after clipping are dropped and described in `warnings`.
  std::vector<GroundedBox> ground(std::span<const std::uint8_t> image_bytes,
                                  const std::string& detailed_caption,
                                  double box_threshold = kDefaultBoxThreshold,
                                  std::vector<std::string>* warnings = nullptr,
                                  CallTrace* trace = nullptr) const;

  /// Backoff before retry k (0-based): backoff_base * 2^k.
  static std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int retry);

 private:
  struct Impl;
  std::string post(const std::string& route, const std::string& body, CallTrace* trace) const;

  ServiceEndpoint endpoint_;
  Sleeper sleeper_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace condforge
