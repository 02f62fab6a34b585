#include "flowforge/executor.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <regex>
#include <thread>

#include "flowforge/error.hpp"

namespace flowforge {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

bool terminal(RunState s) {
  return s == RunState::kCompleted || s == RunState::kFailed || s == RunState::kUndeployed;
}

bool terminal(NodeState s) { return s == NodeState::kSucceeded || s == NodeState::kFailed; }

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

namespace detail {

struct NodeRuntime {
  std::string id;
  std::unique_ptr<Operator> op;
  Bindings bindings;
  OperatorContext context;
  std::string topic_in;
  std::string topic_out;
  std::atomic<std::int64_t> records_in{0};
  std::atomic<std::int64_t> records_out{0};
  std::atomic<std::int64_t> busy_us{0};
  std::atomic<bool> exhausted{false};
  std::atomic<std::int64_t> consumed_next{0};
  std::optional<std::int64_t> started_at_ms;
  std::optional<std::int64_t> finished_at_ms;
};

struct Run {
  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  RunRecord record;
  std::vector<StateEvent> events;
  std::vector<std::unique_ptr<NodeRuntime>> nodes;
  std::vector<std::vector<std::size_t>> preds;
  std::optional<opt::ConfigurationPoint> config;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::optional<std::chrono::steady_clock::time_point> t_end;
  bool replayed = false;
  std::optional<RunMetrics> frozen;
  std::atomic<bool> stop{false};
  bool undeploying = false;
  std::vector<std::thread> threads;
};

}  // namespace detail

namespace {

RunMetrics snapshot(const detail::Run& run) {
  if (run.frozen) return *run.frozen;
  RunMetrics m;
  if (run.t_end) {
    m.execution_time_ms = std::chrono::duration<double, std::milli>(*run.t_end - run.t0).count();
  } else if (run.replayed && run.record.finished_at_ms) {
    m.execution_time_ms = static_cast<double>(*run.record.finished_at_ms - run.record.started_at_ms);
  } else {
    m.execution_time_ms = elapsed_ms(run.t0);
  }
  for (const auto& n : run.nodes) {
    NodeMetrics nm;
    nm.execution_time_ms = static_cast<double>(n->busy_us.load()) / 1000.0;
    nm.records_in = n->records_in.load();
    nm.records_out = n->records_out.load();
    nm.started_at_ms = n->started_at_ms;
    nm.finished_at_ms = n->finished_at_ms;
    m.nodes[n->id] = nm;
  }
  return m;
}

RunMetrics metrics_from_json(const json& j) {
  RunMetrics m;
  m.execution_time_ms = j.value("execution_time_ms", 0.0);
  auto nodes = j.value("nodes", json::object());
  for (const auto& [id, n] : nodes.items()) {
    NodeMetrics nm;
    nm.execution_time_ms = n.value("execution_time_ms", 0.0);
    nm.records_in = n.value("records_in", std::int64_t{0});
    nm.records_out = n.value("records_out", std::int64_t{0});
    if (n.contains("started_at_ms") && !n["started_at_ms"].is_null()) nm.started_at_ms = n["started_at_ms"];
    if (n.contains("finished_at_ms") && !n["finished_at_ms"].is_null()) nm.finished_at_ms = n["finished_at_ms"];
    m.nodes[id] = nm;
  }
  return m;
}

}  // namespace

std::string_view run_state_name(RunState state) {
  switch (state) {
    case RunState::kDeploying: return "deploying";
    case RunState::kRunning: return "running";
    case RunState::kCompleted: return "completed";
    case RunState::kFailed: return "failed";
    case RunState::kUndeployed: return "undeployed";
  }
  return "failed";
}

std::string_view node_state_name(NodeState state) {
  switch (state) {
    case NodeState::kPending: return "pending";
    case NodeState::kRunning: return "running";
    case NodeState::kSucceeded: return "succeeded";
    case NodeState::kFailed: return "failed";
  }
  return "failed";
}

std::optional<RunState> parse_run_state(std::string_view name) {
  for (auto s : {RunState::kDeploying, RunState::kRunning, RunState::kCompleted, RunState::kFailed,
                 RunState::kUndeployed}) {
    if (run_state_name(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<NodeState> parse_node_state(std::string_view name) {
  for (auto s : {NodeState::kPending, NodeState::kRunning, NodeState::kSucceeded, NodeState::kFailed}) {
    if (node_state_name(s) == name) return s;
  }
  return std::nullopt;
}

json run_to_json(const RunRecord& r) {
  json states = json::object();
  for (const auto& [id, s] : r.node_states) states[id] = node_state_name(s);
  return {{"run_id", r.run_id},
          {"workflow_name", r.workflow_name},
          {"mode", mode_name(r.mode)},
          {"state", run_state_name(r.state)},
          {"node_states", states},
          {"node_errors", r.node_errors},
          {"started_at_ms", r.started_at_ms},
          {"finished_at_ms", optional_json(r.finished_at_ms)},
          {"deployment_config", r.deployment_config ? *r.deployment_config : json(nullptr)},
          {"error", optional_json(r.error)}};
}

json metrics_to_json(const RunMetrics& m) {
  json nodes = json::object();
  for (const auto& [id, n] : m.nodes) {
    nodes[id] = {{"execution_time_ms", n.execution_time_ms},
                 {"records_in", n.records_in},
                 {"records_out", n.records_out},
                 {"started_at_ms", optional_json(n.started_at_ms)},
                 {"finished_at_ms", optional_json(n.finished_at_ms)}};
  }
  return {{"execution_time_ms", m.execution_time_ms}, {"nodes", nodes}};
}

Executor::Executor(Broker& broker, TableStore& tables, Options options, const OperatorRegistry& registry)
    : broker_(broker), tables_(tables), options_(std::move(options)), registry_(registry) {
  if (!options_.journal.empty()) {
    if (options_.journal.has_parent_path()) std::filesystem::create_directories(options_.journal.parent_path());
    replay();
    journal_out_.open(options_.journal, std::ios::app);
    if (!journal_out_) throw Error(Errc::kIoError, "cannot open run journal " + options_.journal.string());
    // Runs that were live when the previous process stopped cannot resume.
    for (auto& [id, run] : runs_) {
      if (terminal(run->record.state)) continue;
      for (auto& [node, state] : run->record.node_states) {
        if (state == NodeState::kRunning) set_node_state(*run, node, NodeState::kFailed, "interrupted by restart");
      }
      set_run_state(*run, RunState::kFailed, "interrupted by restart");
    }
  }
}

Executor::~Executor() {
  std::vector<std::shared_ptr<detail::Run>> runs;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, r] : runs_) runs.push_back(r);
  }
  for (auto& run : runs) {
    run->stop = true;
    std::vector<std::thread> threads;
    {
      std::lock_guard lock(run->mutex);
      threads.swap(run->threads);
    }
    for (auto& t : threads) {
      if (t.joinable()) t.join();
    }
    if (run->record.mode == WorkflowMode::kStream && !terminal(run->record.state)) {
      for (const auto& n : run->nodes) set_node_state(*run, n->id, NodeState::kSucceeded);
      set_run_state(*run, RunState::kUndeployed);
    }
  }
}

void Executor::journal(const json& line) {
  std::lock_guard lock(journal_mutex_);
  if (!journal_out_.is_open()) return;
  journal_out_ << line.dump() << '\n';
  journal_out_.flush();
}

void Executor::replay() {
  std::ifstream in(options_.journal);
  if (!in) return;
  static const std::regex id_pattern("run-([0-9]+)");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      auto id = j.at("run_id").get<std::string>();
      auto event = j.value("event", std::string("state"));
      if (event == "created") {
        auto run = std::make_shared<detail::Run>();
        run->replayed = true;
        auto& r = run->record;
        r.run_id = id;
        r.workflow_name = j.at("workflow").get<std::string>();
        r.mode = parse_mode(j.at("mode").get<std::string>()).value_or(WorkflowMode::kBatch);
        r.started_at_ms = j.at("ts_ms").get<std::int64_t>();
        for (const auto& n : j.at("nodes")) r.node_states[n.get<std::string>()] = NodeState::kPending;
        if (!j["deployment_config"].is_null()) r.deployment_config = j["deployment_config"];
        runs_[id] = run;
        std::smatch m;
        if (std::regex_match(id, m, id_pattern)) next_id_ = std::max(next_id_, std::stoul(m[1].str()) + 1);
        continue;
      }
      auto it = runs_.find(id);
      if (it == runs_.end()) continue;
      auto& run = *it->second;
      if (event == "metrics") {
        run.frozen = metrics_from_json(j.at("metrics"));
        continue;
      }
      StateEvent e{j.at("ts_ms").get<std::int64_t>(), j.value("node", std::string()),
                   j.at("from").get<std::string>(), j.at("to").get<std::string>()};
      if (e.node.empty()) {
        run.record.state = parse_run_state(e.to).value_or(RunState::kFailed);
        if (terminal(run.record.state)) run.record.finished_at_ms = e.ts_ms;
        if (j.contains("error")) run.record.error = j["error"].get<std::string>();
      } else {
        run.record.node_states[e.node] = parse_node_state(e.to).value_or(NodeState::kFailed);
        if (j.contains("error")) run.record.node_errors[e.node] = j["error"].get<std::string>();
      }
      run.events.push_back(std::move(e));
    } catch (const std::exception&) {
      // Torn or foreign lines are ignored.
    }
  }
}

void Executor::set_run_state(detail::Run& run, RunState state, std::optional<std::string> error) {
  json line;
  {
    std::lock_guard lock(run.mutex);
    auto from = run.record.state;
    if (terminal(from) || from == state) return;
    StateEvent e{now_ms(), "", std::string(run_state_name(from)), std::string(run_state_name(state))};
    run.record.state = state;
    if (error) run.record.error = error;
    if (terminal(state)) {
      run.record.finished_at_ms = std::max(e.ts_ms, run.record.started_at_ms);
      run.t_end = std::chrono::steady_clock::now();
      run.frozen.reset();
      run.frozen = snapshot(run);
    }
    line = {{"ts_ms", e.ts_ms}, {"run_id", run.record.run_id}, {"from", e.from}, {"to", e.to}};
    if (error) line["error"] = *error;
    run.events.push_back(std::move(e));
    run.changed.notify_all();
  }
  journal(line);
  if (terminal(state)) {
    std::lock_guard lock(run.mutex);
    journal({{"run_id", run.record.run_id}, {"event", "metrics"}, {"metrics", metrics_to_json(*run.frozen)}});
  }
}

void Executor::set_node_state(detail::Run& run, const std::string& node, NodeState state,
                              std::optional<std::string> error) {
  json line;
  {
    std::lock_guard lock(run.mutex);
    auto& current = run.record.node_states[node];
    if (terminal(current) || current == state) return;
    StateEvent e{now_ms(), node, std::string(node_state_name(current)), std::string(node_state_name(state))};
    current = state;
    if (error) run.record.node_errors[node] = *error;
    line = {{"ts_ms", e.ts_ms}, {"run_id", run.record.run_id}, {"node", node}, {"from", e.from}, {"to", e.to}};
    if (error) line["error"] = *error;
    run.events.push_back(std::move(e));
    run.changed.notify_all();
  }
  journal(line);
}

std::shared_ptr<detail::Run> Executor::find(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(Errc::kNotFound, "run not found: " + run_id, {{"run_id", run_id}});
  return it->second;
}

std::shared_ptr<detail::Run> Executor::create_run(const ValidatedWorkflow& vw,
                                                  const std::optional<opt::ConfigurationPoint>& config) {
  const auto& def = vw.definition;
  auto run = std::make_shared<detail::Run>();
  run->config = config;
  bool streaming = def.mode == WorkflowMode::kStream;
  for (const auto& node : def.nodes) {
    auto rt = std::make_unique<detail::NodeRuntime>();
    rt->id = node.id;
    const auto& descriptor = vw.resolved.at(node.id);
    try {
      rt->op = registry_.create(descriptor);
    } catch (const Error& e) {
      throw Error(Errc::kOperatorInitError, "node '" + node.id + "': " + e.what(),
                  {{"node", node.id}, {"service", descriptor.name}, {"cause", e.what()}});
    }
    auto b = vw.bindings.find(node.id);
    if (b != vw.bindings.end()) rt->bindings = b->second;
    rt->context = OperatorContext{def.name, node.id, streaming, &tables_, nullptr};
    run->nodes.push_back(std::move(rt));
  }
  for (auto& rt : run->nodes) rt->context.deployment_config = run->config ? &*run->config : nullptr;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < def.nodes.size(); ++i) index[def.nodes[i].id] = i;
  run->preds.resize(def.nodes.size());
  for (const auto& e : def.edges) run->preds[index.at(e.to)].push_back(index.at(e.from));

  auto& r = run->record;
  r.workflow_name = def.name;
  r.mode = def.mode;
  r.state = RunState::kDeploying;
  r.started_at_ms = now_ms();
  for (const auto& node : def.nodes) r.node_states[node.id] = NodeState::kPending;
  if (config) r.deployment_config = opt::assignment_to_json(config->assignment);
  return run;
}

std::string Executor::deploy_stream(const ValidatedWorkflow& vw,
                                    const std::optional<opt::ConfigurationPoint>& config) {
  const auto& def = vw.definition;
  if (def.mode != WorkflowMode::kStream) {
    throw Error(Errc::kInvalidWorkflow, "workflow '" + def.name + "' is not a stream");
  }
  if (auto live = live_stream(def.name)) {
    throw Error(Errc::kAlreadyDeployed, "stream '" + def.name + "' is already deployed as " + *live,
                {{"workflow", def.name}, {"run_id", *live}});
  }
  auto run = create_run(vw, config);
  for (std::size_t i = 0; i < run->nodes.size(); ++i) {
    auto& rt = *run->nodes[i];
    if (i > 0) rt.topic_in = workflow_topic(def.name, def.nodes[i - 1].id, rt.id);
    if (i + 1 < run->nodes.size()) rt.topic_out = workflow_topic(def.name, rt.id, def.nodes[i + 1].id);
    try {
      rt.op->setup(rt.bindings, rt.context);
    } catch (const std::exception& e) {
      throw Error(Errc::kOperatorInitError, "node '" + rt.id + "': " + e.what(),
                  {{"node", rt.id}, {"cause", e.what()}});
    }
  }

  std::string id;
  {
    std::lock_guard lock(mutex_);
    // Re-checked under the registry lock so two racing deploys cannot both win.
    for (const auto& [rid, other] : runs_) {
      std::lock_guard rlock(other->mutex);
      if (other->record.mode == WorkflowMode::kStream && other->record.workflow_name == def.name &&
          !terminal(other->record.state)) {
        throw Error(Errc::kAlreadyDeployed, "stream '" + def.name + "' is already deployed as " + rid,
                    {{"workflow", def.name}, {"run_id", rid}});
      }
    }
    id = "run-" + std::to_string(next_id_++);
    run->record.run_id = id;
    runs_[id] = run;
  }
  json nodes = json::array();
  for (const auto& n : def.nodes) nodes.push_back(n.id);
  journal({{"run_id", id}, {"event", "created"}, {"workflow", def.name}, {"mode", mode_name(def.mode)},
           {"nodes", nodes}, {"deployment_config", run->record.deployment_config ? *run->record.deployment_config : json(nullptr)},
           {"ts_ms", run->record.started_at_ms}});

  // Topics left by an earlier deployment of the same name start fresh.
  for (const auto& rt : run->nodes) {
    if (!rt->topic_out.empty()) broker_.drop_topic(rt->topic_out);
  }
  for (const auto& rt : run->nodes) set_node_state(*run, rt->id, NodeState::kRunning);
  {
    std::lock_guard lock(run->mutex);
    for (std::size_t i = 0; i < run->nodes.size(); ++i) {
      run->nodes[i]->started_at_ms = now_ms();
      if (i == 0) {
        run->threads.emplace_back([this, run] { run_stream_source(run, 0); });
      } else {
        run->threads.emplace_back([this, run, i] { run_stream_node(run, i); });
      }
    }
  }
  set_run_state(*run, RunState::kRunning);
  return id;
}

void Executor::fail_stream(detail::Run& run, std::size_t index, const std::string& cause) {
  const auto& id = run.nodes[index]->id;
  run.stop = true;
  set_node_state(run, id, NodeState::kFailed, cause);
  for (const auto& n : run.nodes) {
    if (n->id != id) set_node_state(run, n->id, NodeState::kSucceeded);
  }
  set_run_state(run, RunState::kFailed,
                std::string(errc_code(Errc::kOperatorRuntimeError)) + ": node '" + id + "': " + cause);
}

void Executor::run_stream_source(std::shared_ptr<detail::Run> run, std::size_t index) {
  auto& node = *run->nodes[index];
  while (!run->stop) {
    std::optional<TableFrame> batch;
    auto t = std::chrono::steady_clock::now();
    try {
      batch = node.op->next_batch();
      if (batch) {
        node.records_out += static_cast<std::int64_t>(batch->num_rows());
        if (!node.topic_out.empty()) broker_.publish(node.topic_out, encode_frame(*batch));
      }
    } catch (const std::exception& e) {
      fail_stream(*run, index, e.what());
      break;
    }
    node.busy_us += static_cast<std::int64_t>(elapsed_ms(t) * 1000.0);
    if (batch) continue;
    if (node.op->exhausted()) {
      node.exhausted = true;
      break;
    }
    std::this_thread::sleep_for(options_.idle_wait);
  }
  node.op->teardown();
}

void Executor::run_stream_node(std::shared_ptr<detail::Run> run, std::size_t index) {
  auto& node = *run->nodes[index];
  std::optional<Subscription> sub;
  try {
    sub.emplace(broker_.subscribe(node.topic_in, run->record.run_id));
  } catch (const std::exception& e) {
    fail_stream(*run, index, e.what());
    return;
  }
  while (!run->stop) {
    auto messages = broker_.poll(*sub, 1, 50ms);
    for (const auto& m : messages) {
      auto t = std::chrono::steady_clock::now();
      try {
        auto frame = decode_frame(m.payload);
        node.records_in += static_cast<std::int64_t>(frame.num_rows());
        auto outputs = node.op->process(std::span<const TableFrame>(&frame, 1));
        for (const auto& out : outputs) {
          node.records_out += static_cast<std::int64_t>(out.num_rows());
          if (!node.topic_out.empty()) broker_.publish(node.topic_out, encode_frame(out));
        }
        broker_.commit(*sub, m.offset);
        node.consumed_next = m.offset + 1;
      } catch (const std::exception& e) {
        fail_stream(*run, index, e.what());
        node.op->teardown();
        return;
      }
      node.busy_us += static_cast<std::int64_t>(elapsed_ms(t) * 1000.0);
    }
  }
  node.op->teardown();
}

void Executor::undeploy(const std::string& run_id) {
  auto run = find(run_id);
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(run->mutex);
    if (run->record.mode != WorkflowMode::kStream || terminal(run->record.state) || run->undeploying) {
      throw Error(Errc::kNotRunning, "run '" + run_id + "' is not a running stream",
                  {{"run_id", run_id}, {"state", run_state_name(run->record.state)}});
    }
    run->undeploying = true;
    threads.swap(run->threads);
  }
  run->stop = true;
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
  for (const auto& n : run->nodes) {
    n->finished_at_ms = now_ms();
    set_node_state(*run, n->id, NodeState::kSucceeded);
  }
  set_run_state(*run, RunState::kUndeployed);
}

std::string Executor::launch_task(const ValidatedWorkflow& vw,
                                  const std::optional<opt::ConfigurationPoint>& config) {
  const auto& def = vw.definition;
  if (def.mode != WorkflowMode::kBatch) {
    throw Error(Errc::kInvalidWorkflow, "workflow '" + def.name + "' is not a task");
  }
  auto run = create_run(vw, config);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "run-" + std::to_string(next_id_++);
    run->record.run_id = id;
    runs_[id] = run;
  }
  json nodes = json::array();
  for (const auto& n : def.nodes) nodes.push_back(n.id);
  journal({{"run_id", id}, {"event", "created"}, {"workflow", def.name}, {"mode", mode_name(def.mode)},
           {"nodes", nodes}, {"deployment_config", run->record.deployment_config ? *run->record.deployment_config : json(nullptr)},
           {"ts_ms", run->record.started_at_ms}});
  set_run_state(*run, RunState::kRunning);
  std::lock_guard lock(run->mutex);
  run->threads.emplace_back([this, run] { run_batch(run); });
  return id;
}

void Executor::run_batch(std::shared_ptr<detail::Run> run) {
  const std::size_t n = run->nodes.size();
  enum Status { kWaiting, kActive, kDone, kBroken };
  std::vector<Status> status(n, kWaiting);
  std::vector<std::vector<TableFrame>> outputs(n);
  std::mutex mutex;
  std::condition_variable cv;
  std::optional<std::string> failure;
  std::vector<std::thread> workers;

  auto work = [&, run](std::size_t i) {
    auto& node = *run->nodes[i];
    std::vector<TableFrame> inputs;
    for (auto p : run->preds[i]) inputs.insert(inputs.end(), outputs[p].begin(), outputs[p].end());
    std::int64_t in = 0;
    for (const auto& f : inputs) in += static_cast<std::int64_t>(f.num_rows());
    node.records_in = in;
    auto t = std::chrono::steady_clock::now();
    std::vector<TableFrame> out;
    std::optional<std::string> error;
    try {
      node.op->setup(node.bindings, node.context);
      out = node.op->process(inputs);
      node.op->teardown();
    } catch (const std::exception& e) {
      error = e.what();
    }
    node.busy_us = static_cast<std::int64_t>(elapsed_ms(t) * 1000.0);
    {
      std::lock_guard lock(run->mutex);
      node.finished_at_ms = now_ms();
    }
    if (!error) {
      std::int64_t rows = 0;
      for (const auto& f : out) rows += static_cast<std::int64_t>(f.num_rows());
      node.records_out = rows;
      set_node_state(*run, node.id, NodeState::kSucceeded);
    } else {
      set_node_state(*run, node.id, NodeState::kFailed, *error);
    }
    std::lock_guard lock(mutex);
    if (error) {
      status[i] = kBroken;
      if (!failure) failure = std::string(errc_code(Errc::kOperatorRuntimeError)) + ": node '" + node.id + "': " + *error;
    } else {
      outputs[i] = std::move(out);
      status[i] = kDone;
    }
    cv.notify_all();
  };

  {
    std::unique_lock lock(mutex);
    for (;;) {
      if (!failure && !run->stop) {
        for (std::size_t i = 0; i < n; ++i) {
          if (status[i] != kWaiting) continue;
          bool ready = std::all_of(run->preds[i].begin(), run->preds[i].end(),
                                   [&](std::size_t p) { return status[p] == kDone; });
          if (!ready) continue;
          status[i] = kActive;
          {
            std::lock_guard rlock(run->mutex);
            run->nodes[i]->started_at_ms = now_ms();
          }
          lock.unlock();
          set_node_state(*run, run->nodes[i]->id, NodeState::kRunning);
          lock.lock();
          workers.emplace_back(work, i);
        }
      }
      if (std::none_of(status.begin(), status.end(), [](Status s) { return s == kActive; })) break;
      cv.wait(lock);
    }
  }
  for (auto& w : workers) w.join();
  if (failure) {
    set_run_state(*run, RunState::kFailed, *failure);
  } else if (run->stop) {
    set_run_state(*run, RunState::kFailed, "executor shut down");
  } else {
    set_run_state(*run, RunState::kCompleted);
  }
}

RunRecord Executor::get_run(const std::string& run_id) const {
  auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  return run->record;
}

RunMetrics Executor::get_metrics(const std::string& run_id) const {
  auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  return snapshot(*run);
}

std::vector<RunRecord> Executor::list_runs() const {
  std::vector<std::shared_ptr<detail::Run>> runs;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, r] : runs_) runs.push_back(r);
  }
  std::vector<RunRecord> out;
  for (const auto& r : runs) {
    std::lock_guard lock(r->mutex);
    out.push_back(r->record);
  }
  // Numeric id order: run-2 before run-10.
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.run_id.size() != b.run_id.size() ? a.run_id.size() < b.run_id.size() : a.run_id < b.run_id;
  });
  return out;
}

std::vector<StateEvent> Executor::events(const std::string& run_id) const {
  auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  return run->events;
}

std::optional<std::string> Executor::live_stream(const std::string& workflow_name) const {
  std::lock_guard lock(mutex_);
  for (const auto& [id, run] : runs_) {
    std::lock_guard rlock(run->mutex);
    if (run->record.mode == WorkflowMode::kStream && run->record.workflow_name == workflow_name &&
        !terminal(run->record.state)) {
      return id;
    }
  }
  return std::nullopt;
}

RunRecord Executor::wait(const std::string& run_id, std::chrono::milliseconds timeout) const {
  auto run = find(run_id);
  std::unique_lock lock(run->mutex);
  run->changed.wait_for(lock, timeout, [&] { return terminal(run->record.state); });
  return run->record;
}

bool Executor::wait_drained(const std::string& run_id, std::chrono::milliseconds timeout) const {
  auto run = find(run_id);
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    {
      std::lock_guard lock(run->mutex);
      if (run->record.state != RunState::kRunning) return false;
    }
    // Checked upstream first, so a caught-up consumer has seen its final input.
    bool drained = true;
    for (std::size_t i = 0; i < run->nodes.size() && drained; ++i) {
      const auto& node = *run->nodes[i];
      drained = i == 0 ? node.exhausted.load() : node.consumed_next.load() == broker_.end_offset(node.topic_in);
    }
    if (drained) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(5ms);
  }
}

}  // namespace flowforge
