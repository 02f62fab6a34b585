#include "flowforge/optimizer/job.hpp"

#include <chrono>
#include <deque>
#include <fstream>
#include <regex>

#include "flowforge/error.hpp"

namespace flowforge::opt {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json error_json(const std::exception& e) {
  if (const auto* fe = dynamic_cast<const Error*>(&e)) {
    return {{"code", errc_code(fe->code())}, {"message", fe->what()}, {"details", fe->details()}};
  }
  return {{"code", errc_code(Errc::kInternal)}, {"message", e.what()}, {"details", json::object()}};
}

// Raised downstream when an upstream stage forwarded a failure.
struct StageFailure {
  std::string stage;
  json error;
};

// Reads JSON messages from one topic until `done` says the stream is
// complete. Failure envelopes from upstream stages are rethrown.
template <typename Fn>
void consume(Broker& broker, const std::string& topic, const std::string& group, Fn&& on_message) {
  auto sub = broker.subscribe(topic, group);
  for (;;) {
    auto batch = broker.poll(sub, 64, 100ms);
    for (const auto& m : batch) {
      auto j = json::parse(m.payload);
      broker.commit(sub, m.offset);
      if (j.contains("failure")) {
        throw StageFailure{j["failure"].at("stage").get<std::string>(), j["failure"].at("error")};
      }
      if (!on_message(j)) return;
    }
  }
}

// Runs one stage body; any failure is published on the stage's output topic
// so the downstream stages stop instead of waiting forever.
template <typename Fn>
void run_stage(Broker& broker, const std::string& out_topic, const std::string& stage, Fn&& body) {
  try {
    body();
  } catch (const StageFailure& f) {
    broker.publish(out_topic, json{{"failure", {{"stage", f.stage}, {"error", f.error}}}}.dump());
  } catch (const std::exception& e) {
    broker.publish(out_topic, json{{"failure", {{"stage", stage}, {"error", error_json(e)}}}}.dump());
  }
}

class WorkQueue {
 public:
  void push(std::function<void()> job) {
    {
      std::lock_guard lock(mutex_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  std::optional<std::function<void()>> pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return closed_ || !jobs_.empty(); });
    if (jobs_.empty()) return std::nullopt;
    auto job = std::move(jobs_.front());
    jobs_.pop_front();
    return job;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool closed_ = false;
};

}  // namespace

OptimizerJobSpec job_spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "job spec must be an object");
  for (const char* key : {"training_n", "k", "parallelism"}) {
    if (j.contains(key) && (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 0)) {
      throw Error(Errc::kInvalidArgument, std::string(key) + " must be a non-negative integer");
    }
  }
  OptimizerJobSpec spec;
  try {
    if (j.contains("space")) spec.space = space_from_json(j["space"]);
    spec.training_n = j.value("training_n", spec.training_n);
    spec.k = j.value("k", spec.k);
    spec.seed = j.value("seed", spec.seed);
    spec.parallelism = j.value("parallelism", spec.parallelism);
    RrsParams base;
    base.seed = spec.seed;
    spec.rrs = rrs_params_from_json(j.value("rrs", json::object()), base);
    if (j.contains("executor")) spec.executor = j["executor"];
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed job spec: ") + e.what());
  }
  return spec;
}

json job_spec_to_json(const OptimizerJobSpec& spec) {
  return {{"space", space_to_json(spec.space)},
          {"training_n", spec.training_n},
          {"k", spec.k},
          {"seed", spec.seed},
          {"parallelism", spec.parallelism},
          {"rrs", rrs_params_to_json(spec.rrs)},
          {"executor", spec.executor}};
}

std::string_view job_state_name(JobState state) {
  switch (state) {
    case JobState::kPending: return "pending";
    case JobState::kRunning: return "running";
    case JobState::kSucceeded: return "succeeded";
    case JobState::kFailed: return "failed";
  }
  return "pending";
}

json report_to_json(const OptimizationReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back(sample_to_json(s));
  json out = {{"job_id", r.job_id},
              {"state", job_state_name(r.state)},
              {"stage", r.stage},
              {"error", r.error ? *r.error : json(nullptr)},
              {"spec", job_spec_to_json(r.spec)},
              {"model", {{"kind", "knn"}, {"k", r.spec.k}, {"epsilon", 1e-9}}},
              {"default_metric_ms", r.default_metric_ms ? json(*r.default_metric_ms) : json(nullptr)},
              {"samples", samples},
              {"trace", trace_to_json(r.trace)},
              {"recommended", r.recommended ? assignment_to_json(r.recommended->assignment) : json(nullptr)},
              {"predicted", r.predicted ? prediction_to_json(*r.predicted) : json(nullptr)},
              {"measured", r.measured ? sample_to_json(*r.measured) : json(nullptr)},
              {"created_at_ms", r.created_at_ms},
              {"finished_at_ms", r.finished_at_ms ? json(*r.finished_at_ms) : json(nullptr)}};
  return out;
}

OptimizationReport report_from_json(const json& j) {
  OptimizationReport r;
  r.job_id = j.at("job_id").get<std::string>();
  auto state = j.at("state").get<std::string>();
  r.state = state == "succeeded" ? JobState::kSucceeded
            : state == "failed"  ? JobState::kFailed
            : state == "running" ? JobState::kRunning
                                 : JobState::kPending;
  r.stage = j.value("stage", "");
  if (!j["error"].is_null()) r.error = j["error"];
  r.spec = job_spec_from_json(j.at("spec"));
  if (!j["default_metric_ms"].is_null()) r.default_metric_ms = j["default_metric_ms"].get<double>();
  for (const auto& s : j.at("samples")) r.samples.push_back(sample_from_json(r.spec.space, s));
  for (const auto& e : j.at("trace")) {
    TraceEntry t;
    t.phase = e.at("phase").get<std::string>();
    t.point = point_from_json(r.spec.space, e.at("point"));
    t.value = e.at("value").get<double>();
    t.best_so_far = e.at("best_so_far").get<double>();
    if (!e["half_width"].is_null()) t.half_width = e["half_width"].get<double>();
    r.trace.push_back(std::move(t));
  }
  if (!j["recommended"].is_null()) r.recommended = point_from_json(r.spec.space, j["recommended"]);
  if (!j["predicted"].is_null()) {
    r.predicted = Prediction{j["predicted"].at("p_improved").get<double>(),
                             j["predicted"].at("predicted_ratio").get<double>()};
  }
  if (!j["measured"].is_null()) r.measured = sample_from_json(r.spec.space, j["measured"]);
  r.created_at_ms = j.value("created_at_ms", std::int64_t{0});
  if (!j["finished_at_ms"].is_null()) r.finished_at_ms = j["finished_at_ms"].get<std::int64_t>();
  return r;
}

OptimizationReport optimize_job(const OptimizerJobSpec& spec, WorkloadExecutor& executor, Broker& broker,
                                const std::string& job_id,
                                const std::function<void(const std::string&)>& on_stage) {
  check_rrs_params(spec.rrs);
  if (spec.k == 0) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  const auto tunings = optimizer_topic(job_id, kStageTunings);
  const auto samples = optimizer_topic(job_id, kStageSamples);
  const auto model = optimizer_topic(job_id, kStageModel);
  const auto result = optimizer_topic(job_id, kStageResult);
  const auto& space = spec.space;
  auto notify = [&](const std::string& stage) {
    if (on_stage) on_stage(stage);
  };

  // Stage 1: random tunings.
  std::thread tuning_worker([&] {
    run_stage(broker, tunings, kStageTunings, [&] {
      notify(kStageTunings);
      auto points = sample_configs(space, spec.training_n, spec.seed);
      for (std::size_t i = 0; i < points.size(); ++i) {
        broker.publish(tunings, json{{"index", i}, {"point", assignment_to_json(points[i].assignment)}}.dump());
      }
      broker.publish(tunings, json{{"end", true}, {"count", points.size()}}.dump());
    });
  });

  // Stage 2: workload executions, default point first.
  std::thread workload_worker([&] {
    run_stage(broker, samples, kStageSamples, [&] {
      std::size_t expected = 0;
      bool first = true;
      double default_ms = 0.0;
      std::size_t parallelism = spec.parallelism ? spec.parallelism
                                                 : std::max(1u, std::thread::hardware_concurrency());
      WorkQueue queue;
      std::mutex error_mutex;
      std::optional<json> worker_error;
      std::vector<std::thread> pool;
      struct PoolGuard {
        PoolGuard(WorkQueue& q, std::vector<std::thread>& p) : queue(q), pool(p) {}
        WorkQueue& queue;
        std::vector<std::thread>& pool;
        ~PoolGuard() {
          queue.close();
          for (auto& t : pool) {
            if (t.joinable()) t.join();
          }
        }
      };
      std::optional<PoolGuard> guard;
      guard.emplace(queue, pool);
      consume(broker, tunings, "workload", [&](const json& msg) {
        if (first) {
          first = false;
          notify(kStageSamples);
          default_ms = run_workload(space.default_point(), executor, 1.0).metric_ms;
          if (!(default_ms > 0.0)) throw Error(Errc::kExecutorError, "default metric must be positive");
          broker.publish(samples, json{{"default_metric_ms", default_ms}}.dump());
          for (std::size_t i = 0; i < parallelism; ++i) {
            pool.emplace_back([&] {
              while (auto job = queue.pop()) (*job)();
            });
          }
        }
        if (msg.contains("end")) {
          expected = msg.at("count").get<std::size_t>();
          return false;
        }
        auto index = msg.at("index").get<std::size_t>();
        auto point = point_from_json(space, msg.at("point"));
        queue.push([&, index, point] {
          try {
            auto s = run_workload(point, executor, default_ms);
            auto j = sample_to_json(s);
            j["index"] = index;
            broker.publish(samples, j.dump());
          } catch (const std::exception& e) {
            std::lock_guard lock(error_mutex);
            if (!worker_error) worker_error = error_json(e);
          }
        });
        return true;
      });
      guard.reset();
      if (worker_error) throw StageFailure{kStageSamples, *worker_error};
      broker.publish(samples, json{{"end", true}, {"count", expected}}.dump());
    });
  });

  // Stage 3: performance classifier.
  std::thread model_worker([&] {
    run_stage(broker, model, kStageModel, [&] {
      double default_ms = 0.0;
      std::vector<std::pair<std::size_t, json>> collected;
      consume(broker, samples, "classifier", [&](const json& msg) {
        if (msg.contains("default_metric_ms")) {
          default_ms = msg["default_metric_ms"].get<double>();
          return true;
        }
        if (msg.contains("end")) return false;
        collected.emplace_back(msg.at("index").get<std::size_t>(), msg);
        return true;
      });
      notify(kStageModel);
      std::sort(collected.begin(), collected.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<PerformanceSample> training;
      json jsamples = json::array();
      for (const auto& [index, j] : collected) {
        training.push_back(sample_from_json(space, j));
        jsamples.push_back(j);
      }
      train_surrogate(training, default_ms, spec.k);
      broker.publish(model, json{{"k", spec.k}, {"default_metric_ms", default_ms}, {"samples", jsamples}}.dump());
    });
  });

  // Stage 4: recursive random search over the surrogate, then validation.
  std::thread search_worker([&] {
    run_stage(broker, result, kStageResult, [&] {
      consume(broker, model, "search", [&](const json& msg) {
        notify(kStageResult);
        double default_ms = msg.at("default_metric_ms").get<double>();
        std::vector<PerformanceSample> training;
        for (const auto& s : msg.at("samples")) training.push_back(sample_from_json(space, s));
        auto surrogate = train_surrogate(training, default_ms, msg.at("k").get<std::size_t>());
        auto search = rrs_search(
            [&](const ConfigurationPoint& p) { return -predict(surrogate, p).score(); }, space, spec.rrs);
        auto predicted = predict(surrogate, search.best);
        auto measured = run_workload(search.best, executor, default_ms);
        broker.publish(result, json{{"trace", trace_to_json(search.trace)},
                                    {"recommended", assignment_to_json(search.best.assignment)},
                                    {"predicted", prediction_to_json(predicted)},
                                    {"measured", sample_to_json(measured)}}
                                   .dump());
        return false;
      });
    });
  });

  OptimizationReport report;
  report.job_id = job_id;
  report.spec = spec;
  report.state = JobState::kRunning;
  std::optional<StageFailure> failure;
  json outcome;
  try {
    consume(broker, result, "report", [&](const json& msg) {
      outcome = msg;
      return false;
    });
  } catch (const StageFailure& f) {
    failure = f;
  } catch (...) {
    failure = StageFailure{"report", {{"code", "internal"}, {"message", "unreadable stage output"}}};
  }
  tuning_worker.join();
  workload_worker.join();
  model_worker.join();
  search_worker.join();

  if (failure) {
    auto code = failure->error.value("code", std::string("internal"));
    Errc errc = Errc::kInternal;
    for (int c = 0; c <= static_cast<int>(Errc::kInternal); ++c) {
      if (errc_code(static_cast<Errc>(c)) == code) errc = static_cast<Errc>(c);
    }
    auto details = failure->error.value("details", json::object());
    if (!details.is_object()) details = json::object();
    details["stage"] = failure->stage;
    throw Error(errc, "stage '" + failure->stage + "' failed: " + failure->error.value("message", ""), details);
  }

  // The model message carries the default metric and the ordered samples.
  auto last_model = broker.last_message(model);
  auto jmodel = json::parse(last_model->payload);
  report.default_metric_ms = jmodel.at("default_metric_ms").get<double>();
  for (const auto& s : jmodel.at("samples")) report.samples.push_back(sample_from_json(space, s));
  for (const auto& e : outcome.at("trace")) {
    TraceEntry t;
    t.phase = e.at("phase").get<std::string>();
    t.point = point_from_json(space, e.at("point"));
    t.value = e.at("value").get<double>();
    t.best_so_far = e.at("best_so_far").get<double>();
    if (!e["half_width"].is_null()) t.half_width = e["half_width"].get<double>();
    report.trace.push_back(std::move(t));
  }
  report.recommended = point_from_json(space, outcome.at("recommended"));
  report.predicted = Prediction{outcome["predicted"].at("p_improved").get<double>(),
                                outcome["predicted"].at("predicted_ratio").get<double>()};
  report.measured = sample_from_json(space, outcome.at("measured"));
  report.state = JobState::kSucceeded;
  return report;
}

OptimizerJobs::OptimizerJobs(Broker& broker, std::filesystem::path dir) : broker_(broker), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  static const std::regex id_pattern("opt-([0-9]+)");
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    try {
      std::ifstream in(entry.path());
      auto report = report_from_json(json::parse(in));
      // A job that was in flight when the process stopped cannot resume.
      if (report.state == JobState::kPending || report.state == JobState::kRunning) {
        report.state = JobState::kFailed;
        report.error = json{{"code", errc_code(Errc::kInternal)}, {"message", "interrupted by restart"}};
      }
      std::smatch m;
      if (std::regex_match(report.job_id, m, id_pattern)) {
        next_id_ = std::max(next_id_, std::stoul(m[1].str()) + 1);
      }
      reports_[report.job_id] = std::move(report);
    } catch (const std::exception&) {
      // Unreadable reports are skipped.
    }
  }
}

OptimizerJobs::~OptimizerJobs() {
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void OptimizerJobs::persist(const OptimizationReport& report) const {
  auto path = dir_ / (report.job_id + ".json");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << report_to_json(report).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::string OptimizerJobs::start(const OptimizerJobSpec& spec) {
  check_rrs_params(spec.rrs);
  if (spec.k == 0) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  auto executor = make_executor(spec.executor);
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "opt-" + std::to_string(next_id_++);
    OptimizationReport r;
    r.job_id = id;
    r.spec = spec;
    r.created_at_ms = now_ms();
    reports_[id] = r;
    persist(r);
  }
  auto update = [this, id](const std::function<void(OptimizationReport&)>& fn) {
    std::lock_guard lock(mutex_);
    auto& r = reports_[id];
    fn(r);
    persist(r);
    changed_.notify_all();
  };
  std::lock_guard lock(mutex_);
  threads_.emplace_back([this, id, spec, executor, update] {
    update([](OptimizationReport& r) { r.state = JobState::kRunning; });
    try {
      auto report = optimize_job(spec, *executor, broker_, id, [&](const std::string& stage) {
        update([&](OptimizationReport& r) { r.stage = stage; });
      });
      update([&](OptimizationReport& r) {
        report.created_at_ms = r.created_at_ms;
        report.stage = kStageResult;
        report.finished_at_ms = now_ms();
        r = std::move(report);
      });
    } catch (const std::exception& e) {
      auto err = error_json(e);
      update([&](OptimizationReport& r) {
        r.state = JobState::kFailed;
        r.error = err;
        if (err["details"].contains("stage")) r.stage = err["details"]["stage"].get<std::string>();
        r.finished_at_ms = now_ms();
      });
    }
  });
  return id;
}

OptimizationReport OptimizerJobs::get(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = reports_.find(job_id);
  if (it == reports_.end()) {
    throw Error(Errc::kNotFound, "optimizer job not found: " + job_id, {{"job_id", job_id}});
  }
  return it->second;
}

std::vector<OptimizationReport> OptimizerJobs::list() const {
  std::lock_guard lock(mutex_);
  std::vector<OptimizationReport> out;
  for (const auto& [id, r] : reports_) out.push_back(r);
  return out;
}

OptimizationReport OptimizerJobs::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto done = [&] {
    auto it = reports_.find(job_id);
    if (it == reports_.end()) throw Error(Errc::kNotFound, "optimizer job not found: " + job_id);
    return it->second.state == JobState::kSucceeded || it->second.state == JobState::kFailed;
  };
  changed_.wait_for(lock, timeout, done);
  return reports_.at(job_id);
}

}  // namespace flowforge::opt
