#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <thread>
#include <vector>

#include "mediaflow/asset_store.hpp"
#include "mediaflow/metadata_store.hpp"
#include "mediaflow/operators.hpp"
#include "mediaflow/search_index.hpp"
#include "mediaflow/workflow.hpp"

namespace mediaflow {

struct RuntimeConfig {
  std::filesystem::path data_dir = "mediaflow-data";
  std::size_t workers = 4;
  int port = 8080;
  double rate_limit = 50;  // requests per second per client
  Clock clock = system_clock();
  std::optional<std::uint64_t> id_seed;
  std::chrono::milliseconds retry_backoff{100};
  SyntheticDetector model{};

  // MEDIAFLOW_DATA_DIR, MEDIAFLOW_PORT, MEDIAFLOW_WORKERS, MEDIAFLOW_RATE_LIMIT.
  static RuntimeConfig from_env();
};

// The assembled service: stores, operator registry with the built-ins, the
// workflow engine wired to upload triggers, and the search index. Background
// threads (workers + index consumer) run only between start() and stop().
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  void start();
  void stop();
  bool running() const { return !threads_.empty(); }

  // True once no execution is queued or running and the index has caught up
  // with the metadata log. Without background threads this drives the work itself.
  bool wait_idle(std::chrono::milliseconds timeout);

  const RuntimeConfig& config() const { return config_; }
  AssetStore& assets() { return assets_; }
  MetadataStore& metadata() { return metadata_; }
  OperatorRegistry& registry() { return registry_; }
  DetectLabelsOperator& detector() { return *builtins_.detect_labels; }
  WorkflowEngine& engine() { return engine_; }
  SearchIndex& search() { return search_; }

 private:
  bool idle() const;

  RuntimeConfig config_;
  AssetStore assets_;
  MetadataStore metadata_;
  OperatorRegistry registry_;
  BuiltinOperators builtins_;
  WorkflowEngine engine_;
  SearchIndex search_;
  std::vector<std::jthread> threads_;
};

}  // namespace mediaflow
