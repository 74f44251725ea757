#include "mediaflow/cli.hpp"

#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/evaluation.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/gateway.hpp"
#include "mediaflow/runtime.hpp"
#include "mediaflow/vision_dataset.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  if (!fs::is_regular_file(path)) throw UsageError("cannot read " + path);
  return fsutil::read_text(path);
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_input(path));
  } catch (const Json::parse_error& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
}

template <class F>
auto parse_input(const std::string& path, F&& parse) {
  const auto text = read_input(path);
  try {
    return parse(text);
  } catch (const Json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  fsutil::write_atomic(path, text);
}

volatile std::sig_atomic_t g_interrupted = 0;

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mediaflow: media insights workflows, metadata search and detector evaluation", "mediaflow"};
  app.require_subcommand(1);

  std::string data_dir;
  bool json = false;
  app.add_option("--data-dir", data_dir, "Storage root (default: $MEDIAFLOW_DATA_DIR or ./mediaflow-data)");
  app.add_flag("--json", json, "Compact canonical JSON output");

  std::function<int()> action;
  std::unique_ptr<Runtime> runtime;
  auto rt = [&]() -> Runtime& {
    if (!runtime) {
      RuntimeConfig config;
      try {
        config = RuntimeConfig::from_env();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      if (!data_dir.empty()) config.data_dir = data_dir;
      runtime = std::make_unique<Runtime>(std::move(config));
    }
    return *runtime;
  };
  auto emit = [&](const Json& doc) {
    out << (json ? canonical_dump(doc) : canonical_dump_pretty(doc)) << '\n';
  };
  auto asset_arg = [](const std::string& text) {
    auto id = AssetId::parse(text);
    if (!id) throw Error(ErrorCode::UnknownAsset, "unknown asset " + text);
    return *id;
  };

  // ---- asset ----
  auto* asset = app.add_subcommand("asset", "Store and read media assets");
  asset->require_subcommand(1);

  std::string put_file, put_kind, put_name, put_transcript;
  auto* put = asset->add_subcommand("put", "Upload a file");
  put->add_option("--file", put_file, "Payload file")->required();
  put->add_option("--kind", put_kind, "Image | Video | Audio | Text")->required();
  put->add_option("--name", put_name, "Asset name (default: file name)");
  put->add_option("--transcript", put_transcript, "Transcript text for Audio/Video");
  put->callback([&] {
    action = [&] {
      const auto kind = parse_media_kind(put_kind);
      if (!kind) throw UsageError("unknown media kind " + put_kind);
      if (!fs::is_regular_file(put_file)) throw UsageError("cannot read " + put_file);
      const auto bytes = fsutil::read_bytes(put_file);
      const auto name = put_name.empty() ? fs::path(put_file).filename().string() : put_name;
      std::optional<std::string> transcript;
      if (!put_transcript.empty()) transcript = put_transcript;
      const auto id = rt().assets().put_asset(bytes, *kind, name, transcript);
      if (json) emit(Json{{"asset_id", id.hex()}});
      else out << id.hex() << '\n';
      return 0;
    };
  });

  std::string get_id, get_out;
  auto* get = asset->add_subcommand("get", "Fetch an asset (descriptor with --json, bytes otherwise)");
  get->add_option("--id", get_id, "Asset id")->required();
  get->add_option("--out", get_out, "Write payload to this file instead of stdout");
  get->callback([&] {
    action = [&] {
      const auto stored = rt().assets().get_asset(asset_arg(get_id));
      if (json) {
        emit(to_json(stored.descriptor));
      } else {
        write_output(get_out, std::string(stored.payload.begin(), stored.payload.end()), out);
      }
      return 0;
    };
  });

  std::string list_kind;
  std::optional<std::int64_t> list_after;
  auto* list = asset->add_subcommand("list", "List asset descriptors");
  list->add_option("--kind", list_kind, "Only this media kind");
  list->add_option("--created-after", list_after, "Exclusive lower bound (ms since epoch)");
  list->callback([&] {
    action = [&] {
      AssetFilter filter;
      if (!list_kind.empty()) {
        filter.kind = parse_media_kind(list_kind);
        if (!filter.kind) throw UsageError("unknown media kind " + list_kind);
      }
      filter.created_after = list_after;
      Json arr = Json::array();
      for (const auto& a : rt().assets().list_assets(filter)) arr.push_back(to_json(a));
      emit(arr);
      return 0;
    };
  });

  // ---- workflow ----
  auto* workflow = app.add_subcommand("workflow", "Manage workflow definitions");
  workflow->require_subcommand(1);

  std::string wf_file;
  auto* reg = workflow->add_subcommand("register", "Register or replace a workflow");
  reg->add_option("--file", wf_file, "WorkflowDefinition JSON file ('-' for stdin)")->required();
  reg->callback([&] {
    action = [&] {
      const auto def = workflow_from_json(read_json_file(wf_file));
      auto& engine = rt().engine();
      engine.register_workflow(def);
      emit(Json{{"name", def.name}, {"version", engine.workflow_version(def.name)}});
      return 0;
    };
  });

  std::string wf_name;
  auto* show = workflow->add_subcommand("show", "Print a workflow definition");
  show->add_option("--name", wf_name, "Workflow name")->required();
  show->callback([&] {
    action = [&] {
      emit(to_json(rt().engine().get_workflow(wf_name)));
      return 0;
    };
  });

  // ---- exec ----
  auto* exec = app.add_subcommand("exec", "Start and observe executions");
  exec->require_subcommand(1);

  std::string exec_workflow, exec_asset;
  auto* start = exec->add_subcommand("start", "Queue an execution");
  start->add_option("--workflow", exec_workflow, "Workflow name")->required();
  start->add_option("--asset", exec_asset, "Asset id")->required();
  start->callback([&] {
    action = [&] {
      auto& engine = rt().engine();
      engine.workflow_version(exec_workflow);  // unknown workflow outranks a bad asset id
      const auto id = engine.start_execution(exec_workflow, asset_arg(exec_asset));
      if (json) emit(Json{{"execution_id", id.hex()}});
      else out << id.hex() << '\n';
      return 0;
    };
  });

  std::string exec_id;
  auto exec_lookup = [&](const std::string& text) {
    auto id = ExecutionId::parse(text);
    if (!id) throw Error(ErrorCode::NotFound, "no execution " + text);
    return rt().engine().get_execution(*id);
  };
  auto* status = exec->add_subcommand("status", "Print an execution record");
  status->add_option("--id", exec_id, "Execution id")->required();
  status->callback([&] {
    action = [&] {
      emit(to_json(exec_lookup(exec_id)));
      return 0;
    };
  });

  int watch_timeout_ms = 60000;
  auto* watch = exec->add_subcommand("watch", "Run workers in-process until the execution finishes");
  watch->add_option("--id", exec_id, "Execution id")->required();
  watch->add_option("--timeout-ms", watch_timeout_ms, "Give up after this long")->check(CLI::PositiveNumber);
  watch->callback([&] {
    action = [&] {
      auto& r = rt();
      auto record = exec_lookup(exec_id);
      r.start();
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(watch_timeout_ms);
      std::string last;
      for (;;) {
        record = exec_lookup(exec_id);
        const auto state = std::string(to_string(record.state));
        if (state != last && !json) out << state << '\n';
        last = state;
        if (record.state == ExecutionState::Complete || record.state == ExecutionState::Error) break;
        if (std::chrono::steady_clock::now() >= deadline) {
          r.stop();
          throw Error(ErrorCode::OperatorTimeout, "execution still " + state + " after " +
                                                      std::to_string(watch_timeout_ms) + " ms");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      r.wait_idle(std::chrono::milliseconds(watch_timeout_ms));
      r.stop();
      emit(to_json(record));
      return record.state == ExecutionState::Complete ? 0 : 1;
    };
  });

  // ---- metadata ----
  auto* metadata = app.add_subcommand("metadata", "Read metadata records");
  metadata->require_subcommand(1);
  std::string md_asset, md_operator;
  auto* md_get = metadata->add_subcommand("get", "Latest record per operator, or one operator's history");
  md_get->add_option("--asset", md_asset, "Asset id")->required();
  md_get->add_option("--operator", md_operator, "Operator name (full history)");
  md_get->callback([&] {
    action = [&] {
      const auto id = asset_arg(md_asset);
      if (!rt().assets().contains(id)) throw Error(ErrorCode::UnknownAsset, "unknown asset " + md_asset);
      std::optional<std::string_view> op;
      if (!md_operator.empty()) op = md_operator;
      Json arr = Json::array();
      for (const auto& rec : rt().metadata().get_metadata(id, op)) arr.push_back(to_json(rec));
      emit(arr);
      return 0;
    };
  });

  // ---- search ----
  std::map<std::string, std::string> search_params;
  std::string s_label, s_q, s_asset, s_operator, s_status;
  std::optional<double> s_min_conf;
  std::optional<std::int64_t> s_from, s_to;
  std::optional<std::size_t> s_limit;
  bool s_history = false;
  auto* search = app.add_subcommand("search", "Query the metadata index");
  search->add_option("--label", s_label, "Condition label that must be present");
  search->add_option("--min-confidence", s_min_conf, "Minimum confidence for --label");
  search->add_option("--from-ts", s_from, "Earliest produced_at (ms, inclusive)");
  search->add_option("--to-ts", s_to, "Latest produced_at (ms, inclusive)");
  search->add_option("-q,--q", s_q, "Free text; every token must occur");
  search->add_option("--asset", s_asset, "Only this asset");
  search->add_option("--operator", s_operator, "Only this operator");
  search->add_option("--status", s_status, "Ok | Failed");
  search->add_option("--limit", s_limit, "Maximum hits (default 100)");
  search->add_flag("--history", s_history, "Include superseded versions");
  search->callback([&] {
    action = [&] {
      auto set = [&](const char* k, const std::string& v) {
        if (!v.empty()) search_params[k] = v;
      };
      set("label", s_label);
      set("q", s_q);
      set("asset_id", s_asset);
      set("operator", s_operator);
      set("status", s_status);
      if (s_min_conf) search_params["min_confidence"] = std::to_string(*s_min_conf);
      if (s_from) search_params["from_ts"] = std::to_string(*s_from);
      if (s_to) search_params["to_ts"] = std::to_string(*s_to);
      if (s_limit) search_params["limit"] = std::to_string(*s_limit);
      if (s_history) search_params["history"] = "true";
      auto& r = rt();
      r.search().consume_pending();
      emit(to_json(r.search().query(search_query_from_params(search_params))));
      return 0;
    };
  });

  // ---- dataset ----
  auto* dataset = app.add_subcommand("dataset", "Labeled dataset tools");
  dataset->require_subcommand(1);

  std::string ds_manifest, ds_out;
  std::uint64_t ds_seed = 0;
  auto* split = dataset->add_subcommand("split", "70/20/10 train/validation/test split");
  split->add_option("--manifest", ds_manifest, "Dataset manifest (JSONL)")->required();
  split->add_option("--seed", ds_seed, "Shuffle seed")->required();
  split->add_option("--out-dir", ds_out, "Write train/validation/test .jsonl here");
  split->callback([&] {
    action = [&] {
      const auto d = parse_input(ds_manifest, parse_manifest);
      const auto s = split_dataset(d, ds_seed);
      if (!ds_out.empty()) {
        fs::create_directories(ds_out);
        fsutil::write_atomic(fs::path(ds_out) / "train.jsonl", write_manifest(s.train));
        fsutil::write_atomic(fs::path(ds_out) / "validation.jsonl", write_manifest(s.validation));
        fsutil::write_atomic(fs::path(ds_out) / "test.jsonl", write_manifest(s.test));
      }
      emit(split_summary(s));
      return 0;
    };
  });

  double bal_alpha = 1.0;
  std::vector<std::string> bal_labels;
  auto* bal = dataset->add_subcommand("balance", "Oversample minority labels");
  bal->add_option("--manifest", ds_manifest, "Training manifest (JSONL)")->required();
  bal->add_option("--alpha", bal_alpha, "Target fraction of the majority count")->check(CLI::Range(0.0, 1.0));
  bal->add_option("--seed", ds_seed, "Sampling seed")->required();
  bal->add_option("--labels", bal_labels, "Labels to balance (default: all)")->delimiter(',');
  bal->add_option("--out", ds_out, "Output manifest (default: stdout)");
  bal->callback([&] {
    action = [&] {
      const auto d = parse_input(ds_manifest, parse_manifest);
      std::optional<LabelSet> scope;
      if (!bal_labels.empty()) {
        scope.emplace();
        for (const auto& l : bal_labels) scope->set(require_label(l));
      }
      write_output(ds_out, write_manifest(balance(d, bal_alpha, ds_seed, scope)), out);
      return 0;
    };
  });

  std::size_t gen_n = 1000;
  double gen_prev = 0.2;
  auto* gen = dataset->add_subcommand("generate", "Synthetic labeled corpus");
  gen->add_option("--n", gen_n, "Examples")->check(CLI::PositiveNumber);
  gen->add_option("--prevalence", gen_prev, "Per-label prevalence")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", ds_seed, "Seed")->required();
  gen->add_option("--out", ds_out, "Output manifest (default: stdout)");
  gen->callback([&] {
    action = [&] {
      std::array<double, kLabelCount> prevalence;
      prevalence.fill(gen_prev);
      write_output(ds_out, write_manifest(generate_corpus(gen_n, prevalence, ds_seed)), out);
      return 0;
    };
  });

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "Detector evaluation");
  eval->require_subcommand(1);

  std::string ev_preds, ev_truth, ev_thresholds, ev_out, ev_model;
  double ev_iou_min = 0.5;
  bool ev_table = false;
  auto* run = eval->add_subcommand("run", "Compute the metrics report");
  run->add_option("--preds", ev_preds, "Scored predictions (JSONL)")->required();
  run->add_option("--truth", ev_truth, "Dataset manifest (JSONL)")->required();
  run->add_option("--thresholds", ev_thresholds, "Per-label thresholds JSON (default 0.5)");
  run->add_option("--iou-min", ev_iou_min, "Box match threshold")->check(CLI::Range(0.0, 1.0));
  run->add_option("--out", ev_out, "Write the report here instead of stdout");
  run->add_flag("--table", ev_table, "Human-readable table instead of JSON");
  run->callback([&] {
    action = [&] {
      const auto preds = parse_input(ev_preds, parse_predictions);
      const auto truth = parse_input(ev_truth, parse_manifest);
      Thresholds t;
      t.fill(0.5);
      if (!ev_thresholds.empty()) t = thresholds_from_json(read_json_file(ev_thresholds), 0.5);
      const auto report = evaluate(preds, truth, t, ev_iou_min);
      write_output(ev_out, ev_table ? render_table(report) : canonical_dump(to_json(report)) + "\n", out);
      return 0;
    };
  });

  auto* thr = eval->add_subcommand("thresholds", "Best-F1 threshold per label");
  thr->add_option("--preds", ev_preds, "Scored predictions (JSONL)")->required();
  thr->add_option("--truth", ev_truth, "Validation manifest (JSONL)")->required();
  thr->add_option("--out", ev_out, "Write thresholds JSON here instead of stdout");
  thr->callback([&] {
    action = [&] {
      const auto preds = parse_input(ev_preds, parse_predictions);
      const auto truth = parse_input(ev_truth, parse_manifest);
      write_output(ev_out, canonical_dump(to_json(select_thresholds(preds, truth))) + "\n", out);
      return 0;
    };
  });

  auto* predict = eval->add_subcommand("predict", "Score a manifest with the synthetic detector");
  predict->add_option("--model", ev_model, "Detector JSON")->required();
  predict->add_option("--truth", ev_truth, "Dataset manifest (JSONL)")->required();
  predict->add_option("--out", ev_out, "Predictions output (default: stdout)");
  predict->callback([&] {
    action = [&] {
      SyntheticDetector model;
      try {
        model = synthetic_detector_from_json(read_json_file(ev_model));
      } catch (const Json::exception& e) {
        throw UsageError(ev_model + ": " + e.what());
      }
      const auto truth = parse_input(ev_truth, parse_manifest);
      write_output(ev_out, write_predictions(predict_dataset(model, truth)), out);
      return 0;
    };
  });

  // ---- serve ----
  std::optional<int> serve_port;
  std::string serve_host = "0.0.0.0";
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway with background workers");
  serve->add_option("--port", serve_port, "Listen port (default: $MEDIAFLOW_PORT or 8080)");
  serve->add_option("--host", serve_host, "Listen address");
  serve->callback([&] {
    action = [&] {
      auto& r = rt();
      Gateway::Options options;
      options.rate_limit = r.config().rate_limit;
      Gateway gateway(r, options);
      r.start();
      const int port = serve_port.value_or(r.config().port);
      err << "mediaflow listening on " << serve_host << ':' << port << " (data " << r.config().data_dir.string()
          << ", " << r.config().workers << " workers)\n";
      std::signal(SIGINT, [](int) { g_interrupted = 1; });
      std::signal(SIGTERM, [](int) { g_interrupted = 1; });
      std::jthread watcher([&](std::stop_token stop) {
        while (!stop.stop_requested() && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        gateway.stop();
      });
      const bool ok = gateway.serve(serve_host, port);
      watcher.request_stop();
      r.stop();
      if (!ok && !g_interrupted) throw Error(ErrorCode::StorageFailure, "cannot listen on port " + std::to_string(port));
      return 0;
    };
  });

  std::vector<std::string> argv_storage{"mediaflow"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  auto report = [&](std::string_view code, const std::string& message) {
    if (json) err << canonical_dump(Json{{"error", {{"code", code}, {"message", message}}}}) << '\n';
    else err << "error: " << code << ": " << message << '\n';
  };
  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    report("USAGE", e.what());
    return 2;
  } catch (const Error& e) {
    report(error_code_name(e.code()), e.what());
    return 1;
  } catch (const Json::exception& e) {
    report(error_code_name(ErrorCode::InvalidInput), e.what());
    return 1;
  } catch (const std::exception& e) {
    report("INTERNAL", e.what());
    return 1;
  }
}

}  // namespace mediaflow
