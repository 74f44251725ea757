#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mediaflow/asset_store.hpp"
#include "mediaflow/canonical_json.hpp"
#include "mediaflow/clock.hpp"
#include "mediaflow/durable_queue.hpp"
#include "mediaflow/ids.hpp"
#include "mediaflow/metadata_store.hpp"
#include "mediaflow/operators.hpp"

namespace mediaflow {

struct OperatorConfig {
  std::string kind;
  std::string instance;
  Json parameters = Json::object();
  std::uint32_t max_retries = 2;
  std::uint32_t timeout_ms = 30000;
};

struct StageDefinition {
  std::string name;
  std::vector<OperatorConfig> operators;
};

// Start the workflow for every uploaded asset of this kind (any kind if empty).
struct Trigger {
  std::optional<MediaKind> media_kind;
};

struct WorkflowDefinition {
  std::string name;
  std::vector<StageDefinition> stages;
  std::vector<Trigger> triggers;
};

Json to_json(const WorkflowDefinition& def);
// Structural parse only; throws InvalidDefinition on shape errors.
WorkflowDefinition workflow_from_json(const Json& doc);

enum class ExecutionState { Queued, Started, Complete, Error };
enum class StageState { Pending, Started, Complete, Error };

std::string_view to_string(ExecutionState state);
std::string_view to_string(StageState state);

struct ExecutionRecord {
  ExecutionId execution_id;
  std::string workflow_name;
  std::uint32_t workflow_version = 0;
  AssetId asset_id;
  ExecutionState state = ExecutionState::Queued;
  std::vector<std::pair<std::string, StageState>> stage_states;  // definition order
  std::map<std::string, std::uint32_t> operator_attempts;        // "stage/instance"
  std::vector<std::string> skipped;  // "stage/instance" not applicable to the media kind
  Timestamp created_at = 0;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
  std::optional<std::string> failure_reason;

  bool terminal() const { return state == ExecutionState::Complete || state == ExecutionState::Error; }
};

Json to_json(const ExecutionRecord& record);
ExecutionRecord execution_record_from_json(const Json& doc);

std::string attempt_key(std::string_view stage, std::string_view instance);

// The control plane. Stages run in order; the operators of one stage run
// concurrently and the stage resolves once all of them have finished.
// Operators whose input kinds exclude the asset's kind are skipped.
class WorkflowEngine {
 public:
  struct Options {
    Clock clock = system_clock();
    std::chrono::milliseconds retry_backoff{0};
    std::optional<std::uint64_t> id_seed;
  };

  WorkflowEngine(std::filesystem::path root, AssetStore& assets, MetadataStore& metadata,
                 OperatorRegistry& registry);
  WorkflowEngine(std::filesystem::path root, AssetStore& assets, MetadataStore& metadata,
                 OperatorRegistry& registry, Options options);
  ~WorkflowEngine();

  WorkflowEngine(const WorkflowEngine&) = delete;
  WorkflowEngine& operator=(const WorkflowEngine&) = delete;

  // Validates and persists; replacing a name bumps its version while running
  // executions keep the version they started with. Throws InvalidDefinition.
  void register_workflow(const WorkflowDefinition& definition);
  WorkflowDefinition get_workflow(const std::string& name) const;
  std::uint32_t workflow_version(const std::string& name) const;
  std::vector<std::string> workflow_names() const;

  // Throws UnknownWorkflow, UnknownAsset.
  ExecutionId start_execution(const std::string& workflow_name, const AssetId& asset_id);

  // Runs one stage of one queued execution. Returns false when idle.
  bool run_worker_step();

  // Throws NotFound.
  ExecutionRecord get_execution(const ExecutionId& id) const;
  std::vector<ExecutionRecord> list_executions() const;

  // Trigger table hook for AssetCreated events.
  void on_asset_created(const AssetCreated& event);

  bool wait_for_work(std::chrono::milliseconds timeout) const { return queue_.wait(timeout); }
  std::size_t pending_messages() const { return queue_.pending() + queue_.in_flight(); }

 private:
  struct ResolvedWorkflow {
    WorkflowDefinition definition;
    std::uint32_t version = 0;
    std::vector<std::vector<std::shared_ptr<const Operator>>> operators;  // [stage][op]
  };

  struct OperatorOutcome {
    bool skipped = false;
    bool ok = false;
    std::uint32_t attempts = 0;
    std::string error;
  };

  void validate(const WorkflowDefinition& def) const;
  std::shared_ptr<const ResolvedWorkflow> resolve(WorkflowDefinition def, std::uint32_t version) const;
  std::shared_ptr<const ResolvedWorkflow> workflow_at(const std::string& name, std::uint32_t version) const;
  void persist(const ExecutionRecord& record) const;
  template <class F>
  ExecutionRecord update(const ExecutionId& id, F&& mutate);

  OperatorOutcome run_operator_with_retries(const ExecutionId& id, const std::string& stage,
                                            const OperatorConfig& config,
                                            const std::shared_ptr<const Operator>& op,
                                            const std::shared_ptr<const StoredAsset>& asset,
                                            const std::shared_ptr<const std::vector<MetadataRecord>>& prior);

  std::filesystem::path root_;
  AssetStore& assets_;
  MetadataStore& metadata_;
  OperatorRegistry& registry_;
  Options options_;
  IdGenerator ids_;
  DurableQueue queue_;

  mutable std::mutex workflows_mutex_;
  std::map<std::string, std::vector<std::shared_ptr<const ResolvedWorkflow>>> workflows_;

  mutable std::mutex executions_mutex_;
  std::map<ExecutionId, ExecutionRecord> executions_;

  // Attempts abandoned on timeout still reference the stores; the destructor
  // waits for them.
  std::mutex abandoned_mutex_;
  std::condition_variable abandoned_cv_;
  int abandoned_ = 0;
};

}  // namespace mediaflow
