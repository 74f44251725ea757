#include "mediaflow/runtime.hpp"

#include <cstdlib>
#include <string>

#include "mediaflow/error.hpp"
#include "mediaflow/mixing.hpp"

namespace mediaflow {

namespace {

template <class T>
T env_number(const char* name, T fallback) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != std::string(raw).size() || v <= 0) throw std::invalid_argument(name);
    return static_cast<T>(v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidInput, std::string(name) + " must be a positive number");
  }
}

AssetStore::Options asset_options(const RuntimeConfig& c) {
  return {c.clock, c.id_seed ? std::optional(hash_words(*c.id_seed, {0xA55E7})) : std::nullopt};
}

WorkflowEngine::Options engine_options(const RuntimeConfig& c) {
  return {c.clock, c.retry_backoff, c.id_seed ? std::optional(hash_words(*c.id_seed, {0xE4EC})) : std::nullopt};
}

}  // namespace

RuntimeConfig RuntimeConfig::from_env() {
  RuntimeConfig c;
  if (const char* dir = std::getenv("MEDIAFLOW_DATA_DIR"); dir && *dir) c.data_dir = dir;
  c.port = env_number("MEDIAFLOW_PORT", c.port);
  c.workers = env_number("MEDIAFLOW_WORKERS", c.workers);
  c.rate_limit = env_number("MEDIAFLOW_RATE_LIMIT", c.rate_limit);
  return c;
}

Runtime::Runtime(RuntimeConfig config)
    : config_(std::move(config)),
      assets_(config_.data_dir, asset_options(config_)),
      metadata_(config_.data_dir, assets_, MetadataStore::Options{config_.clock}),
      builtins_(register_builtin_operators(registry_, config_.model)),
      engine_(config_.data_dir, assets_, metadata_, registry_, engine_options(config_)),
      search_(config_.data_dir, metadata_) {
  assets_.subscribe([this](const AssetCreated& event) { engine_.on_asset_created(event); });
  search_.consume_pending();
}

Runtime::~Runtime() { stop(); }

void Runtime::start() {
  if (running()) return;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, config_.workers); ++w)
    threads_.emplace_back([this](std::stop_token stop) {
      while (!stop.stop_requested()) {
        if (!engine_.run_worker_step()) engine_.wait_for_work(std::chrono::milliseconds(50));
      }
    });
  threads_.emplace_back([this](std::stop_token stop) {
    while (!stop.stop_requested()) {
      search_.consume_pending();
      metadata_.wait_for_events(search_.checkpoint(), std::chrono::milliseconds(50));
    }
  });
}

void Runtime::stop() {
  for (auto& t : threads_) t.request_stop();
  threads_.clear();  // joins
}

bool Runtime::idle() const {
  return engine_.pending_messages() == 0 && search_.checkpoint() >= metadata_.last_sequence();
}

bool Runtime::wait_idle(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!idle()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    if (running()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    } else {
      while (engine_.run_worker_step()) {
      }
      search_.consume_pending();
    }
  }
  return true;
}

}  // namespace mediaflow
