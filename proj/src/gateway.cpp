#include "mediaflow/gateway.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/detection.hpp"
#include "mediaflow/evaluation.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/vision_dataset.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownAsset:
    case ErrorCode::UnknownWorkflow:
      return 404;
    case ErrorCode::KindInUse:
      return 409;
    case ErrorCode::BodyTooLarge:
    case ErrorCode::PayloadTooLarge:
      return 413;
    case ErrorCode::StorageFailure:
    case ErrorCode::OperatorFailure:
    case ErrorCode::OperatorTimeout:
      return 500;
    default:
      return 400;
  }
}

ApiError to_api_error(const Error& error) {
  return {http_status_for(error.code()), std::string(error_code_name(error.code())), error.what()};
}

ApiResponse error_response(const ApiError& error) {
  ApiResponse res;
  res.status = error.http_status;
  res.body = canonical_dump(Json{{"error", {{"code", error.code}, {"message", error.message}}}});
  return res;
}

// ---- rate limiting ---------------------------------------------------------

RateLimiter::RateLimiter(double per_second, SecondsClock clock) : rate_(per_second), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
  }
}

RateLimiter::Decision RateLimiter::acquire(const std::string& client) {
  if (rate_ <= 0) return {};
  const double now = clock_();
  std::lock_guard lock(mutex_);
  auto [it, fresh] = buckets_.try_emplace(client, Bucket{rate_, now});
  auto& b = it->second;
  if (!fresh) {
    b.tokens = std::min(rate_, b.tokens + (now - b.updated) * rate_);
    b.updated = now;
  }
  if (b.tokens >= 1.0) {
    b.tokens -= 1.0;
    return {};
  }
  return {false, (1.0 - b.tokens) / rate_};
}

// ---- request helpers -------------------------------------------------------

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

double parse_double(const std::string& name, const std::string& text) {
  double v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    throw Error(ErrorCode::InvalidInput, name + " must be a number");
  return v;
}

std::int64_t parse_int(const std::string& name, const std::string& text) {
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw Error(ErrorCode::InvalidInput, name + " must be an integer");
  return v;
}

Json parse_body(const std::string& body) {
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, std::string("request body is not valid JSON: ") + e.what());
  }
}

AssetId asset_id_param(const std::string& text) {
  auto id = AssetId::parse(text);
  if (!id) throw Error(ErrorCode::UnknownAsset, "unknown asset " + text);
  return *id;
}

ApiResponse json_response(const Json& doc, int status = 200) {
  ApiResponse res;
  res.status = status;
  res.body = canonical_dump(doc);
  return res;
}

ApiResponse route_not_found(const ApiRequest& req) {
  return error_response({404, "NOT_FOUND", "no route for " + req.method + " " + req.path});
}

std::optional<std::string> header(const ApiRequest& req, const std::string& name) {
  auto it = req.headers.find(name);
  if (it == req.headers.end()) return std::nullopt;
  return it->second;
}

}  // namespace

Query search_query_from_params(const std::map<std::string, std::string>& params) {
  static const std::set<std::string> kKnown = {"label", "min_confidence", "from_ts", "to_ts", "q", "limit",
                                               "asset_id", "operator", "status", "history"};
  for (const auto& [k, _] : params)
    if (!kKnown.count(k)) throw Error(ErrorCode::InvalidInput, "unknown search parameter " + k);
  auto get = [&](const char* k) -> const std::string* {
    auto it = params.find(k);
    return it == params.end() ? nullptr : &it->second;
  };

  Query q;
  if (auto* label = get("label")) {
    require_label(*label);
    q.term_filters.push_back({"labels." + *label + ".present", "true"});
    if (auto* mc = get("min_confidence"))
      q.range_filters.push_back({"labels." + *label + ".confidence", parse_double("min_confidence", *mc), std::nullopt});
  } else if (get("min_confidence")) {
    throw Error(ErrorCode::InvalidInput, "min_confidence requires label");
  }
  std::optional<double> from, to;
  if (auto* v = get("from_ts")) from = static_cast<double>(parse_int("from_ts", *v));
  if (auto* v = get("to_ts")) to = static_cast<double>(parse_int("to_ts", *v));
  if (from || to) q.range_filters.push_back({std::string(kTimestampField), from, to});
  if (auto* v = get("q")) q.free_text = tokenize(*v);
  if (auto* v = get("asset_id")) q.term_filters.push_back({std::string(kAssetField), *v});
  if (auto* v = get("operator")) q.term_filters.push_back({std::string(kOperatorField), *v});
  if (auto* v = get("status")) q.term_filters.push_back({std::string(kStatusField), *v});
  if (auto* v = get("limit")) {
    const auto limit = parse_int("limit", *v);
    if (limit <= 0) throw Error(ErrorCode::InvalidInput, "limit must be positive");
    q.limit = static_cast<std::size_t>(limit);
  }
  if (auto* v = get("history")) {
    if (*v != "true" && *v != "false") throw Error(ErrorCode::InvalidInput, "history must be true or false");
    q.include_history = *v == "true";
  }
  return q;
}

// ---- gateway ---------------------------------------------------------------

struct Gateway::Server {
  httplib::Server http;
  std::jthread thread;
};

Gateway::Gateway(Runtime& runtime) : Gateway(runtime, Options{}) {}

Gateway::Gateway(Runtime& runtime, Options options)
    : runtime_(runtime), options_(std::move(options)), limiter_(options_.rate_limit, options_.limiter_clock) {}

Gateway::~Gateway() { stop(); }

ApiResponse Gateway::handle(const ApiRequest& request) {
  const auto decision = limiter_.acquire(request.client);
  if (!decision.allowed) {
    auto res = error_response({429, "RATE_LIMITED", "rate limit exceeded"});
    res.headers["Retry-After"] = std::to_string(std::max(1, static_cast<int>(std::ceil(decision.retry_after_seconds))));
    return res;
  }
  return route(request);
}

ApiResponse Gateway::route(const ApiRequest& request) {
  try {
    if (request.body.size() > options_.max_payload)
      throw Error(ErrorCode::PayloadTooLarge, "request body exceeds " + std::to_string(options_.max_payload) + " bytes");
    return dispatch(request);
  } catch (const Error& e) {
    return error_response(to_api_error(e));
  } catch (const Json::exception& e) {
    return error_response({400, std::string(error_code_name(ErrorCode::InvalidInput)), e.what()});
  } catch (const std::exception& e) {
    return error_response({500, "INTERNAL", e.what()});
  }
}

std::string Gateway::resolve_ref(const std::string& ref) const {
  if (auto id = AssetId::parse(ref); id && runtime_.assets().contains(*id)) {
    const auto stored = runtime_.assets().get_asset(*id);
    return std::string(stored.payload.begin(), stored.payload.end());
  }
  const fs::path rel(ref);
  if (ref.empty() || rel.is_absolute() ||
      std::any_of(rel.begin(), rel.end(), [](const fs::path& part) { return part == ".."; }))
    throw Error(ErrorCode::InvalidInput, "reference must be an asset id or a path inside the data directory: " + ref);
  const auto path = runtime_.config().data_dir / rel;
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::NotFound, "no such reference " + ref);
  return fsutil::read_text(path);
}

ApiResponse Gateway::dispatch(const ApiRequest& req) {
  const auto parts = split_path(req.path);
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";
  if (parts.empty()) return route_not_found(req);
  const auto& head = parts[0];

  if (head == "assets") {
    if (parts.size() == 1 && post) {
      const auto kind_name = header(req, "x-media-kind");
      if (!kind_name) throw Error(ErrorCode::InvalidInput, "missing X-Media-Kind header");
      const auto kind = parse_media_kind(*kind_name);
      if (!kind) throw Error(ErrorCode::UnsupportedMediaKind, "unknown media kind " + *kind_name);
      const auto name = header(req, "x-asset-name").value_or("");
      const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
      const auto id = runtime_.assets().put_asset({data, req.body.size()}, *kind, name, header(req, "x-transcript"));
      return json_response(Json{{"asset_id", id.hex()}}, 201);
    }
    if (parts.size() == 1 && get) {
      AssetFilter filter;
      for (const auto& [k, v] : req.query) {
        if (k == "kind") {
          filter.kind = parse_media_kind(v);
          if (!filter.kind) throw Error(ErrorCode::UnsupportedMediaKind, "unknown media kind " + v);
        } else if (k == "created_after") {
          filter.created_after = parse_int("created_after", v);
        } else {
          throw Error(ErrorCode::InvalidInput, "unknown parameter " + k);
        }
      }
      Json list = Json::array();
      for (const auto& a : runtime_.assets().list_assets(filter)) list.push_back(to_json(a));
      return json_response(list);
    }
    if (parts.size() == 2 && get) {
      auto id = AssetId::parse(parts[1]);
      if (!id) throw Error(ErrorCode::NotFound, "no asset " + parts[1]);
      const auto stored = runtime_.assets().get_asset(*id);
      ApiResponse res;
      res.content_type = "application/octet-stream";
      res.body.assign(stored.payload.begin(), stored.payload.end());
      return res;
    }
  } else if (head == "workflows") {
    if (parts.size() == 1 && post) {
      const auto def = workflow_from_json(parse_body(req.body));
      runtime_.engine().register_workflow(def);
      return json_response(Json{{"name", def.name}, {"version", runtime_.engine().workflow_version(def.name)}}, 201);
    }
    if (parts.size() == 2 && get) return json_response(to_json(runtime_.engine().get_workflow(parts[1])));
  } else if (head == "executions") {
    if (parts.size() == 1 && post) {
      const auto body = parse_body(req.body);
      const auto workflow = body.at("workflow").get<std::string>();
      runtime_.engine().workflow_version(workflow);  // unknown workflow outranks a bad asset id
      const auto id = runtime_.engine().start_execution(workflow, asset_id_param(body.at("asset_id").get<std::string>()));
      return json_response(Json{{"execution_id", id.hex()}}, 201);
    }
    if (parts.size() == 2 && get) {
      auto id = ExecutionId::parse(parts[1]);
      if (!id) throw Error(ErrorCode::NotFound, "no execution " + parts[1]);
      return json_response(to_json(runtime_.engine().get_execution(*id)));
    }
  } else if (head == "metadata") {
    if (parts.size() == 2 && get) {
      const auto id = asset_id_param(parts[1]);
      if (!runtime_.assets().contains(id)) throw Error(ErrorCode::UnknownAsset, "unknown asset " + parts[1]);
      std::optional<std::string_view> op;
      if (auto it = req.query.find("operator"); it != req.query.end()) op = it->second;
      Json list = Json::array();
      for (const auto& r : runtime_.metadata().get_metadata(id, op)) list.push_back(to_json(r));
      return json_response(list);
    }
  } else if (head == "search") {
    if (parts.size() == 1 && get) return json_response(to_json(runtime_.search().query(search_query_from_params(req.query))));
  } else if (head == "evaluate") {
    if (parts.size() == 1 && post) {
      const auto body = parse_body(req.body);
      const auto preds = parse_predictions(resolve_ref(body.at("predictions_ref").get<std::string>()));
      const auto truth = parse_manifest(resolve_ref(body.at("dataset_ref").get<std::string>()));
      Thresholds t;
      t.fill(0.5);
      if (body.contains("thresholds")) t = thresholds_from_json(body.at("thresholds"), 0.5);
      return json_response(to_json(evaluate(preds, truth, t)));
    }
  }
  return route_not_found(req);
}

void Gateway::setup_server() {
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  http.set_payload_max_length(options_.max_payload);
  auto adapter = [this](const httplib::Request& in, httplib::Response& out) {
    ApiRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    for (const auto& [k, v] : in.headers) {
      std::string name = k;
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      req.headers.emplace(std::move(name), v);
    }
    req.body = in.body;
    req.client = in.remote_addr;
    const auto res = handle(req);
    out.status = res.status;
    for (const auto& [k, v] : res.headers) out.set_header(k, v);
    out.set_content(res.body, res.content_type);
  };
  http.Get(".*", adapter);
  http.Post(".*", adapter);
  http.Put(".*", adapter);
  http.Delete(".*", adapter);
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ApiError err = res.status == 413
                             ? ApiError{413, std::string(error_code_name(ErrorCode::PayloadTooLarge)), "request body too large"}
                             : ApiError{res.status, "HTTP_ERROR", "request failed"};
    res.set_content(error_response(err).body, "application/json");
  });
}

bool Gateway::serve(const std::string& host, int port) {
  setup_server();
  return server_->http.listen(host, port);
}

int Gateway::serve_background(const std::string& host) {
  setup_server();
  const int port = server_->http.bind_to_any_port(host);
  if (port <= 0) throw Error(ErrorCode::StorageFailure, "cannot bind " + host);
  server_->thread = std::jthread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
  return port;
}

void Gateway::stop() {
  if (server_) {
    server_->http.stop();
    if (server_->thread.joinable()) server_->thread.join();
  }
}

}  // namespace mediaflow
