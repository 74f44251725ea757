#include "mediaflow/workflow.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidDefinition, what); }

bool safe_name(const std::string& s) {
  return !s.empty() && s.size() <= 128 && s != "." && s != ".." &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '_' || c == '-' || c == '.';
         });
}

}  // namespace

std::string_view to_string(ExecutionState s) {
  switch (s) {
    case ExecutionState::Queued: return "Queued";
    case ExecutionState::Started: return "Started";
    case ExecutionState::Complete: return "Complete";
    case ExecutionState::Error: return "Error";
  }
  return "Queued";
}

std::string_view to_string(StageState s) {
  switch (s) {
    case StageState::Pending: return "Pending";
    case StageState::Started: return "Started";
    case StageState::Complete: return "Complete";
    case StageState::Error: return "Error";
  }
  return "Pending";
}

std::string attempt_key(std::string_view stage, std::string_view instance) {
  return std::string(stage) + "/" + std::string(instance);
}

Json to_json(const WorkflowDefinition& def) {
  Json stages = Json::array();
  for (const auto& s : def.stages) {
    Json ops = Json::array();
    for (const auto& o : s.operators)
      ops.push_back({{"kind", o.kind},
                     {"instance", o.instance},
                     {"parameters", o.parameters},
                     {"max_retries", o.max_retries},
                     {"timeout_ms", o.timeout_ms}});
    stages.push_back({{"name", s.name}, {"operators", std::move(ops)}});
  }
  Json triggers = Json::array();
  for (const auto& t : def.triggers)
    triggers.push_back(t.media_kind ? Json{{"media_kind", to_string(*t.media_kind)}} : Json::object());
  return Json{{"name", def.name}, {"stages", std::move(stages)}, {"triggers", std::move(triggers)}};
}

WorkflowDefinition workflow_from_json(const Json& doc) {
  if (!doc.is_object()) invalid("workflow definition must be a JSON object");
  WorkflowDefinition def;
  try {
    def.name = doc.at("name").get<std::string>();
    if (!doc.contains("stages") || !doc["stages"].is_array()) invalid("stages empty");
    for (const auto& s : doc["stages"]) {
      StageDefinition stage;
      stage.name = s.at("name").get<std::string>();
      for (const auto& o : s.at("operators")) {
        OperatorConfig c;
        c.kind = o.at("kind").get<std::string>();
        c.instance = o.value("instance", c.kind);
        c.parameters = o.value("parameters", Json::object());
        c.max_retries = o.value("max_retries", 2u);
        c.timeout_ms = o.value("timeout_ms", 30000u);
        stage.operators.push_back(std::move(c));
      }
      def.stages.push_back(std::move(stage));
    }
    for (const auto& t : doc.value("triggers", Json::array())) {
      Trigger trig;
      if (t.contains("media_kind") && !t["media_kind"].is_null()) {
        trig.media_kind = parse_media_kind(t["media_kind"].get<std::string>());
        if (!trig.media_kind) invalid("unknown trigger media_kind " + t["media_kind"].dump());
      }
      def.triggers.push_back(trig);
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed workflow definition: ") + e.what());
  }
  return def;
}

Json to_json(const ExecutionRecord& r) {
  Json stages = Json::object();
  Json order = Json::array();
  for (const auto& [name, state] : r.stage_states) {
    stages[name] = to_string(state);
    order.push_back(name);
  }
  auto opt_ts = [](const std::optional<Timestamp>& t) { return t ? Json(*t) : Json(nullptr); };
  return Json{
      {"execution_id", r.execution_id.hex()},
      {"workflow_name", r.workflow_name},
      {"workflow_version", r.workflow_version},
      {"asset_id", r.asset_id.hex()},
      {"state", to_string(r.state)},
      {"stage_states", std::move(stages)},
      {"stage_order", std::move(order)},
      {"operator_attempts", r.operator_attempts},
      {"skipped", r.skipped},
      {"created_at", r.created_at},
      {"started_at", opt_ts(r.started_at)},
      {"finished_at", opt_ts(r.finished_at)},
      {"failure_reason", r.failure_reason ? Json(*r.failure_reason) : Json(nullptr)},
  };
}

ExecutionRecord execution_record_from_json(const Json& doc) {
  auto parse_exec = [](std::string_view s) {
    for (auto st : {ExecutionState::Queued, ExecutionState::Started, ExecutionState::Complete, ExecutionState::Error})
      if (to_string(st) == s) return st;
    throw Error(ErrorCode::StorageFailure, "bad execution state");
  };
  auto parse_stage = [](std::string_view s) {
    for (auto st : {StageState::Pending, StageState::Started, StageState::Complete, StageState::Error})
      if (to_string(st) == s) return st;
    throw Error(ErrorCode::StorageFailure, "bad stage state");
  };
  auto opt_ts = [](const Json& j) { return j.is_null() ? std::optional<Timestamp>{} : j.get<Timestamp>(); };
  ExecutionRecord r;
  r.execution_id = *ExecutionId::parse(doc.at("execution_id").get<std::string>());
  r.workflow_name = doc.at("workflow_name").get<std::string>();
  r.workflow_version = doc.at("workflow_version").get<std::uint32_t>();
  r.asset_id = *AssetId::parse(doc.at("asset_id").get<std::string>());
  r.state = parse_exec(doc.at("state").get<std::string>());
  for (const auto& name : doc.at("stage_order"))
    r.stage_states.emplace_back(name.get<std::string>(),
                                parse_stage(doc.at("stage_states").at(name.get<std::string>()).get<std::string>()));
  r.operator_attempts = doc.at("operator_attempts").get<std::map<std::string, std::uint32_t>>();
  r.skipped = doc.at("skipped").get<std::vector<std::string>>();
  r.created_at = doc.at("created_at").get<Timestamp>();
  r.started_at = opt_ts(doc.at("started_at"));
  r.finished_at = opt_ts(doc.at("finished_at"));
  if (const auto& f = doc.at("failure_reason"); !f.is_null()) r.failure_reason = f.get<std::string>();
  return r;
}

// ---- engine ----------------------------------------------------------------

WorkflowEngine::WorkflowEngine(fs::path root, AssetStore& assets, MetadataStore& metadata,
                               OperatorRegistry& registry)
    : WorkflowEngine(std::move(root), assets, metadata, registry, Options{}) {}

WorkflowEngine::WorkflowEngine(fs::path root, AssetStore& assets, MetadataStore& metadata,
                               OperatorRegistry& registry, Options options)
    : root_(std::move(root)),
      assets_(assets),
      metadata_(metadata),
      registry_(registry),
      options_(std::move(options)),
      ids_(options_.id_seed ? IdGenerator(*options_.id_seed) : IdGenerator()),
      queue_(root_ / "queue" / "dispatch.ndjson") {
  std::error_code ec;
  fs::create_directories(root_ / "workflows", ec);
  fs::create_directories(root_ / "executions", ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create engine directories under " + root_.string());

  for (const auto& dir : fs::directory_iterator(root_ / "workflows")) {
    if (!dir.is_directory()) continue;
    std::vector<std::pair<std::uint32_t, fs::path>> versions;
    for (const auto& f : fs::directory_iterator(dir.path()))
      if (f.path().extension() == ".json")
        versions.emplace_back(static_cast<std::uint32_t>(std::stoul(f.path().stem().string())), f.path());
    std::sort(versions.begin(), versions.end());
    auto& list = workflows_[dir.path().filename().string()];
    for (const auto& [v, path] : versions)
      list.push_back(resolve(workflow_from_json(Json::parse(fsutil::read_text(path))), v));
    if (!list.empty())
      for (const auto& stage : list.back()->definition.stages)
        for (const auto& op : stage.operators) registry_.pin(op.kind);
  }
  for (const auto& f : fs::directory_iterator(root_ / "executions")) {
    if (f.path().extension() != ".json") continue;
    auto r = execution_record_from_json(Json::parse(fsutil::read_text(f.path())));
    executions_.emplace(r.execution_id, std::move(r));
  }
}

WorkflowEngine::~WorkflowEngine() {
  {
    std::unique_lock lock(abandoned_mutex_);
    abandoned_cv_.wait(lock, [&] { return abandoned_ == 0; });
  }
  std::lock_guard lock(workflows_mutex_);
  for (const auto& [name, list] : workflows_)
    if (!list.empty())
      for (const auto& stage : list.back()->definition.stages)
        for (const auto& op : stage.operators) registry_.unpin(op.kind);
}

void WorkflowEngine::validate(const WorkflowDefinition& def) const {
  if (!safe_name(def.name)) invalid("workflow name '" + def.name + "' must be 1-128 characters of [A-Za-z0-9_.-]");
  if (def.stages.empty()) invalid("stages empty");
  std::set<std::string> stage_names;
  for (const auto& stage : def.stages) {
    if (stage.name.empty()) invalid("stage name empty");
    if (!stage_names.insert(stage.name).second) invalid("duplicate stage name '" + stage.name + "'");
    if (stage.operators.empty()) invalid("stage '" + stage.name + "' has no operators");
    std::set<std::string> instances;
    for (const auto& op : stage.operators) {
      if (op.instance.empty()) invalid("stage '" + stage.name + "': operator instance name empty");
      if (op.instance.find('/') != std::string::npos)
        invalid("operator instance '" + op.instance + "' must not contain '/'");
      if (!instances.insert(op.instance).second)
        invalid("stage '" + stage.name + "': duplicate operator instance '" + op.instance + "'");
      auto impl = registry_.find(op.kind);
      if (!impl) invalid("stage '" + stage.name + "': unknown operator kind '" + op.kind + "'");
      if (op.timeout_ms == 0) invalid("operator '" + op.instance + "': timeout_ms must be positive");
      try {
        validate_parameters(impl->spec(), op.parameters);
      } catch (const Error& e) {
        invalid("stage '" + stage.name + "', operator '" + op.instance + "': " + e.what());
      }
    }
  }
}

std::shared_ptr<const WorkflowEngine::ResolvedWorkflow> WorkflowEngine::resolve(
    WorkflowDefinition def, std::uint32_t version) const {
  auto wf = std::make_shared<ResolvedWorkflow>();
  for (const auto& stage : def.stages) {
    auto& ops = wf->operators.emplace_back();
    for (const auto& op : stage.operators) ops.push_back(registry_.find(op.kind));
  }
  wf->definition = std::move(def);
  wf->version = version;
  return wf;
}

void WorkflowEngine::register_workflow(const WorkflowDefinition& definition) {
  validate(definition);
  std::lock_guard lock(workflows_mutex_);
  auto& list = workflows_[definition.name];
  const std::uint32_t version = list.empty() ? 1 : list.back()->version + 1;
  fsutil::write_atomic(root_ / "workflows" / definition.name / (std::to_string(version) + ".json"),
                       canonical_dump(to_json(definition)));
  for (const auto& stage : definition.stages)
    for (const auto& op : stage.operators) registry_.pin(op.kind);
  if (!list.empty())
    for (const auto& stage : list.back()->definition.stages)
      for (const auto& op : stage.operators) registry_.unpin(op.kind);
  list.push_back(resolve(definition, version));
}

WorkflowDefinition WorkflowEngine::get_workflow(const std::string& name) const {
  std::lock_guard lock(workflows_mutex_);
  auto it = workflows_.find(name);
  if (it == workflows_.end() || it->second.empty())
    throw Error(ErrorCode::UnknownWorkflow, "workflow '" + name + "' is not registered");
  return it->second.back()->definition;
}

std::uint32_t WorkflowEngine::workflow_version(const std::string& name) const {
  std::lock_guard lock(workflows_mutex_);
  auto it = workflows_.find(name);
  if (it == workflows_.end() || it->second.empty())
    throw Error(ErrorCode::UnknownWorkflow, "workflow '" + name + "' is not registered");
  return it->second.back()->version;
}

std::vector<std::string> WorkflowEngine::workflow_names() const {
  std::lock_guard lock(workflows_mutex_);
  std::vector<std::string> out;
  for (const auto& [name, list] : workflows_)
    if (!list.empty()) out.push_back(name);
  return out;
}

std::shared_ptr<const WorkflowEngine::ResolvedWorkflow> WorkflowEngine::workflow_at(
    const std::string& name, std::uint32_t version) const {
  std::lock_guard lock(workflows_mutex_);
  auto it = workflows_.find(name);
  if (it == workflows_.end() || version == 0 || version > it->second.size()) return nullptr;
  return it->second[version - 1];
}

void WorkflowEngine::persist(const ExecutionRecord& record) const {
  fsutil::write_atomic(root_ / "executions" / (record.execution_id.hex() + ".json"),
                       canonical_dump(to_json(record)));
}

template <class F>
ExecutionRecord WorkflowEngine::update(const ExecutionId& id, F&& mutate) {
  std::lock_guard lock(executions_mutex_);
  auto& record = executions_.at(id);
  mutate(record);
  persist(record);
  return record;
}

ExecutionId WorkflowEngine::start_execution(const std::string& workflow_name, const AssetId& asset_id) {
  std::shared_ptr<const ResolvedWorkflow> wf;
  {
    std::lock_guard lock(workflows_mutex_);
    auto it = workflows_.find(workflow_name);
    if (it == workflows_.end() || it->second.empty())
      throw Error(ErrorCode::UnknownWorkflow, "workflow '" + workflow_name + "' is not registered");
    wf = it->second.back();
  }
  if (!assets_.contains(asset_id))
    throw Error(ErrorCode::UnknownAsset, "asset " + asset_id.hex() + " not found");

  ExecutionRecord record;
  record.execution_id = ExecutionId(ids_.next());
  record.workflow_name = workflow_name;
  record.workflow_version = wf->version;
  record.asset_id = asset_id;
  record.created_at = options_.clock();
  for (const auto& stage : wf->definition.stages) record.stage_states.emplace_back(stage.name, StageState::Pending);
  {
    std::lock_guard lock(executions_mutex_);
    persist(record);
    executions_.emplace(record.execution_id, record);
  }
  queue_.push(Json{{"execution_id", record.execution_id.hex()}, {"stage", 0}});
  return record.execution_id;
}

ExecutionRecord WorkflowEngine::get_execution(const ExecutionId& id) const {
  std::lock_guard lock(executions_mutex_);
  auto it = executions_.find(id);
  if (it == executions_.end()) throw Error(ErrorCode::NotFound, "execution " + id.hex() + " not found");
  return it->second;
}

std::vector<ExecutionRecord> WorkflowEngine::list_executions() const {
  std::lock_guard lock(executions_mutex_);
  std::vector<ExecutionRecord> out;
  for (const auto& [id, r] : executions_) out.push_back(r);
  return out;
}

void WorkflowEngine::on_asset_created(const AssetCreated& event) {
  if (event.derived) return;
  std::vector<std::string> targets;
  {
    std::lock_guard lock(workflows_mutex_);
    for (const auto& [name, list] : workflows_) {
      if (list.empty()) continue;
      for (const auto& t : list.back()->definition.triggers) {
        if (!t.media_kind || *t.media_kind == event.asset.kind) {
          targets.push_back(name);
          break;
        }
      }
    }
  }
  for (const auto& name : targets) start_execution(name, event.asset.id);
}

namespace {

struct AttemptState {
  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  std::optional<Json> result;
  std::string error;
};

}  // namespace

WorkflowEngine::OperatorOutcome WorkflowEngine::run_operator_with_retries(
    const ExecutionId& id, const std::string& stage, const OperatorConfig& config,
    const std::shared_ptr<const Operator>& op, const std::shared_ptr<const StoredAsset>& asset,
    const std::shared_ptr<const std::vector<MetadataRecord>>& prior) {
  OperatorOutcome outcome;
  const auto key = attempt_key(stage, config.instance);
  if (!op) {
    outcome.error = "operator kind '" + config.kind + "' is not registered";
    return outcome;
  }
  if (!op->spec().input_kinds.count(asset->descriptor.kind)) {
    outcome.skipped = true;
    outcome.ok = true;
    update(id, [&](ExecutionRecord& r) { r.skipped.push_back(key); });
    return outcome;
  }

  std::optional<Json> body;
  for (std::uint32_t attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    outcome.attempts = attempt;
    update(id, [&](ExecutionRecord& r) { r.operator_attempts[key] = attempt; });

    auto state = std::make_shared<AttemptState>();
    {
      std::lock_guard lock(abandoned_mutex_);
      ++abandoned_;
    }
    std::thread([this, state, op, asset, prior, params = config.parameters] {
      std::optional<Json> result;
      std::string error;
      try {
        result = run_operator(*op, params, asset->descriptor, asset->payload, *prior, &assets_);
      } catch (const Error& e) {
        error = std::string(error_code_name(e.code())) + ": " + e.what();
      } catch (const std::exception& e) {
        error = std::string("INTERNAL: ") + e.what();
      }
      {
        std::lock_guard lock(state->mutex);
        state->result = std::move(result);
        state->error = std::move(error);
        state->done = true;
      }
      state->cv.notify_all();
      std::lock_guard lock(abandoned_mutex_);
      --abandoned_;
      abandoned_cv_.notify_all();
    }).detach();

    std::unique_lock lock(state->mutex);
    const bool finished = state->cv.wait_for(lock, std::chrono::milliseconds(config.timeout_ms),
                                             [&] { return state->done; });
    if (!finished) {
      outcome.error = "OPERATOR_TIMEOUT: exceeded " + std::to_string(config.timeout_ms) + " ms";
    } else if (state->result) {
      body = std::move(state->result);
      break;
    } else {
      outcome.error = state->error;
    }
    lock.unlock();
    if (attempt <= config.max_retries && options_.retry_backoff.count() > 0)
      std::this_thread::sleep_for(options_.retry_backoff);
  }

  if (body) {
    metadata_.store_metadata(asset->descriptor.id, config.instance, std::move(*body), RecordStatus::Ok, id);
    outcome.ok = true;
  } else {
    metadata_.store_metadata(asset->descriptor.id, config.instance,
                             Json{{"error", outcome.error}, {"attempts", outcome.attempts}},
                             RecordStatus::Failed, id);
  }
  return outcome;
}

bool WorkflowEngine::run_worker_step() {
  auto delivery = queue_.try_pop();
  if (!delivery) return false;
  const auto id = ExecutionId::parse(delivery->message.value("execution_id", std::string()));
  const auto stage_index = delivery->message.value("stage", std::size_t{0});

  ExecutionRecord record;
  {
    std::lock_guard lock(executions_mutex_);
    auto it = id ? executions_.find(*id) : executions_.end();
    if (it == executions_.end() || it->second.terminal()) {
      queue_.ack(delivery->id);
      return true;
    }
    record = it->second;
  }
  auto wf = workflow_at(record.workflow_name, record.workflow_version);
  auto fail = [&](const std::string& reason, std::optional<std::size_t> stage) {
    update(*id, [&](ExecutionRecord& r) {
      if (stage) r.stage_states[*stage].second = StageState::Error;
      r.state = ExecutionState::Error;
      r.failure_reason = reason;
      r.finished_at = options_.clock();
    });
    queue_.ack(delivery->id);
    return true;
  };
  if (!wf) return fail("workflow version " + std::to_string(record.workflow_version) + " unavailable", std::nullopt);
  if (stage_index >= wf->definition.stages.size()) return fail("stage index out of range", std::nullopt);

  const auto& stage = wf->definition.stages[stage_index];
  update(*id, [&](ExecutionRecord& r) {
    if (r.state == ExecutionState::Queued) {
      r.state = ExecutionState::Started;
      r.started_at = options_.clock();
    }
    r.stage_states[stage_index].second = StageState::Started;
  });

  std::shared_ptr<const StoredAsset> asset;
  std::shared_ptr<const std::vector<MetadataRecord>> prior;
  try {
    asset = std::make_shared<const StoredAsset>(assets_.get_asset(record.asset_id));
    prior = std::make_shared<const std::vector<MetadataRecord>>(metadata_.get_metadata(record.asset_id));
  } catch (const Error& e) {
    return fail("stage '" + stage.name + "': " + e.what(), stage_index);
  }

  // Fork-join over the stage's operators.
  std::vector<OperatorOutcome> outcomes(stage.operators.size());
  {
    std::vector<std::jthread> forks;
    for (std::size_t k = 1; k < stage.operators.size(); ++k)
      forks.emplace_back([&, k] {
        outcomes[k] = run_operator_with_retries(*id, stage.name, stage.operators[k],
                                                wf->operators[stage_index][k], asset, prior);
      });
    outcomes[0] = run_operator_with_retries(*id, stage.name, stage.operators[0],
                                            wf->operators[stage_index][0], asset, prior);
  }

  for (std::size_t k = 0; k < outcomes.size(); ++k)
    if (!outcomes[k].ok)
      return fail("stage '" + stage.name + "' operator '" + stage.operators[k].instance + "' failed after " +
                      std::to_string(outcomes[k].attempts) + " attempt(s): " + outcomes[k].error,
                  stage_index);

  const bool last = stage_index + 1 == wf->definition.stages.size();
  update(*id, [&](ExecutionRecord& r) {
    r.stage_states[stage_index].second = StageState::Complete;
    if (last) {
      r.state = ExecutionState::Complete;
      r.finished_at = options_.clock();
    }
  });
  if (!last) queue_.push(Json{{"execution_id", id->hex()}, {"stage", stage_index + 1}});
  queue_.ack(delivery->id);
  return true;
}

}  // namespace mediaflow
