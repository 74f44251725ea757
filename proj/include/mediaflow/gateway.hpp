#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "mediaflow/error.hpp"
#include "mediaflow/runtime.hpp"
#include "mediaflow/search_index.hpp"

namespace mediaflow {

inline constexpr std::size_t kMaxPayloadBytes = 64ull << 20;

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lowercase names
  std::string body;
  std::string client = "local";
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ApiError {
  int http_status = 500;
  std::string code;
  std::string message;
};

int http_status_for(ErrorCode code);
ApiError to_api_error(const Error& error);
ApiResponse error_response(const ApiError& error);

// Token bucket per client: capacity == rate, refilled continuously.
class RateLimiter {
 public:
  using SecondsClock = std::function<double()>;

  explicit RateLimiter(double per_second, SecondsClock clock = {});

  struct Decision {
    bool allowed = true;
    double retry_after_seconds = 0;
  };
  Decision acquire(const std::string& client);

 private:
  struct Bucket {
    double tokens;
    double updated;
  };

  double rate_;
  SecondsClock clock_;
  std::mutex mutex_;
  std::unordered_map<std::string, Bucket> buckets_;
};

// GET /search parameters -> index query. Shared with the CLI.
//   label          -> labels.<label>.present = true
//   min_confidence -> labels.<label>.confidence >= v (requires label)
//   from_ts/to_ts  -> @timestamp range (inclusive)
//   q              -> free-text tokens
//   asset_id, operator, status -> reserved-field term filters
//   history=true   -> include superseded versions
Query search_query_from_params(const std::map<std::string, std::string>& params);

class Gateway {
 public:
  struct Options {
    double rate_limit = 50;
    RateLimiter::SecondsClock limiter_clock;
    std::size_t max_payload = kMaxPayloadBytes;
  };

  explicit Gateway(Runtime& runtime);
  Gateway(Runtime& runtime, Options options);

  // Rate limiting, then route().
  ApiResponse handle(const ApiRequest& request);
  // Dispatch per the endpoint table; domain errors become ApiError bodies.
  ApiResponse route(const ApiRequest& request);

  // Blocks serving HTTP until stop().
  bool serve(const std::string& host, int port);
  // Binds an ephemeral port, returns it; serving continues on a background thread.
  int serve_background(const std::string& host = "127.0.0.1");
  void stop();

  ~Gateway();

 private:
  struct Server;

  void setup_server();
  ApiResponse dispatch(const ApiRequest& request);
  std::string resolve_ref(const std::string& ref) const;

  Runtime& runtime_;
  Options options_;
  RateLimiter limiter_;
  std::unique_ptr<Server> server_;
};

}  // namespace mediaflow
