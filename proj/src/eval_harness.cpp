#include "aerocue/eval_harness.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

Json tally_json(const Tally& t) {
  return {{"ticks", t.ticks}, {"passed", t.passed}, {"accuracy", t.accuracy()}};
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

std::optional<double> proportion(std::size_t hit, std::size_t n) {
  if (n == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(n);
}

std::optional<double> diff(const std::optional<double>& pre, const std::optional<double>& post) {
  if (!pre || !post) return std::nullopt;
  return *post - *pre;
}

}  // namespace

EvalReport score_workflow(const std::vector<SessionLog>& logs) {
  EvalReport out;
  for (const SessionLog& log : logs) {
    if (log.records.empty()) continue;
    ++out.logs;
    StandardsTracker tracker(log.header.spec);
    Tally& task = out.per_task[log.header.task_id];
    Tally& cond = out.per_condition[std::string(to_string(log.header.condition))];
    for (const SessionRecord& r : log.records) {
      const DeviationReport report = tracker.step(r.tick, r.state);
      const ValidatorVerdict v = validate_record(report, r.stages);
      const bool pass = v.overall();
      for (Tally* t : {&task, &cond, &out.total}) {
        ++t->ticks;
        t->passed += pass;
      }
      out.failures.c1 += !v.c1;
      out.failures.c2 += !v.c2;
      out.failures.c3 += !v.c3;
      if (v.c1 != r.verdict.c1 || v.c2 != r.verdict.c2 || v.c3 != r.verdict.c3) ++out.stored_disagreements;
    }
  }
  if (out.total.ticks == 0) throw Error(Errc::EmptyLogSet, "no session records to score");
  return out;
}

Json eval_report_to_json(const EvalReport& r, bool with_reference) {
  Json tasks = Json::object();
  for (const auto& [k, t] : r.per_task) tasks[k] = tally_json(t);
  Json conds = Json::object();
  for (const auto& [k, t] : r.per_condition) conds[k] = tally_json(t);
  Json j = {{"logs", r.logs},
            {"per_task", tasks},
            {"per_condition", conds},
            {"total", tally_json(r.total)},
            {"failures", {{"c1", r.failures.c1}, {"c2", r.failures.c2}, {"c3", r.failures.c3}}},
            {"stored_disagreements", r.stored_disagreements}};
  if (with_reference) {
    const ReferenceAccuracy ref;
    Json per_task = Json::object();
    for (const auto& [task, acc] : ref.per_task) per_task[std::string(task)] = acc;
    j["reference"] = {{"note", "published remote-model accuracies; not reproducible with the oracle backend"},
                      {"per_task", per_task},
                      {"total", ref.total},
                      {"normal", ref.normal},
                      {"abnormal", ref.abnormal}};
  }
  return j;
}

std::string render_eval_table(const EvalReport& r, bool with_reference) {
  const ReferenceAccuracy ref;
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %8s %10s %12s\n", "group", "ticks", "passed", "accuracy",
                with_reference ? "reference*" : "");
  out << line;
  auto row = [&](const std::string& name, const Tally& t, std::optional<double> reference) {
    std::snprintf(line, sizeof line, "%-20s %8zu %8zu %10s %12s\n", name.c_str(), t.ticks, t.passed,
                  pct(t.accuracy()).c_str(), with_reference && reference ? pct(*reference).c_str() : "");
    out << line;
  };
  for (const auto& task : kTaskIds) {
    auto it = r.per_task.find(std::string(task));
    if (it == r.per_task.end()) continue;
    std::optional<double> reference;
    for (const auto& [k, v] : ref.per_task)
      if (k == task) reference = v;
    row(it->first, it->second, reference);
  }
  for (const auto& [k, t] : r.per_condition) row(k, t, k == "normal" ? ref.normal : ref.abnormal);
  row("total", r.total, ref.total);
  out << "failures: C1 " << r.failures.c1 << ", C2 " << r.failures.c2 << ", C3 " << r.failures.c3 << "\n";
  if (r.stored_disagreements > 0) out << "stored verdicts disagreeing with recomputation: " << r.stored_disagreements << "\n";
  if (with_reference) out << "* published remote-model accuracy, for comparison only; not reproducible here\n";
  return out.str();
}

TrainingMetrics compute_training_metrics(const std::vector<TelemetryRecord>& trace, const TaskSpec& spec) {
  if (trace.empty()) throw Error(Errc::IncompleteTrace, "empty trace");
  const auto metrics_phase = spec.phase_index(spec.metrics_phase);
  const auto timing_phase = spec.phase_index(spec.timing_start_phase);
  if (!metrics_phase || !timing_phase) throw Error(Errc::InvalidSpecFile, "task has no metrics or timing phase");

  // Last phase carrying a heading envelope: where the rollout is judged.
  std::optional<std::size_t> rollout_phase;
  for (std::size_t i = 0; i < spec.phases.size(); ++i)
    if (spec.phases[i].envelope_for(Metric::heading_deg)) rollout_phase = i;

  TrainingMetrics m;
  m.task_id = spec.task_id;
  std::size_t alt_n = 0, alt_in = 0, bank_n = 0, bank_in = 0, ias_n = 0, ias_in = 0, hdg_n = 0;
  double hdg_sum = 0.0;
  std::optional<double> timing_start_t;
  std::optional<double> complete_t;

  StandardsTracker tracker(spec);
  for (const TelemetryRecord& rec : trace) {
    const DeviationReport r = tracker.step(rec.tick, rec.state);
    if (!timing_start_t && r.phase_index == *timing_phase) timing_start_t = rec.state.t;
    if (!complete_t && r.task_complete && timing_start_t) complete_t = rec.state.t;
    if (r.phase_index == *metrics_phase) {
      ++m.metrics_ticks;
      if (const auto* d = r.find(Metric::altitude_ft)) {
        ++alt_n;
        alt_in += d->in_band;
      }
      if (const auto* d = r.find(Metric::bank_deg)) {
        ++bank_n;
        bank_in += d->in_band;
      }
      if (const auto* d = r.find(Metric::ias_kt)) {
        ++ias_n;
        ias_in += d->in_band;
      }
    }
    if (rollout_phase && r.phase_index == *rollout_phase) {
      if (const auto* d = r.find(Metric::heading_deg)) {
        ++hdg_n;
        hdg_sum += std::abs(d->deviation);
      }
    }
  }
  if (m.metrics_ticks == 0)
    throw Error(Errc::IncompleteTrace, "trace never reaches phase " + spec.metrics_phase);
  m.altitude_in_band_proportion = proportion(alt_in, alt_n);
  m.bank_in_band_proportion = proportion(bank_in, bank_n);
  m.speed_in_band_proportion = proportion(ias_in, ias_n);
  if (hdg_n > 0) m.mean_heading_rollout_error_deg = hdg_sum / static_cast<double>(hdg_n);
  if (complete_t && timing_start_t) m.task_completion_time_s = *complete_t - *timing_start_t;
  return m;
}

TrainingMetrics compute_training_metrics(const SessionLog& log) {
  std::vector<TelemetryRecord> trace;
  trace.reserve(log.records.size());
  for (const auto& r : log.records) trace.push_back({r.tick, r.state, r.source});
  return compute_training_metrics(trace, log.header.spec);
}

MetricDeltas compare_runs(const TrainingMetrics& pre, const TrainingMetrics& post) {
  return {diff(pre.altitude_in_band_proportion, post.altitude_in_band_proportion),
          diff(pre.bank_in_band_proportion, post.bank_in_band_proportion),
          diff(pre.mean_heading_rollout_error_deg, post.mean_heading_rollout_error_deg),
          diff(pre.speed_in_band_proportion, post.speed_in_band_proportion),
          diff(pre.task_completion_time_s, post.task_completion_time_s)};
}

Json training_metrics_to_json(const TrainingMetrics& m) {
  return {{"task", m.task_id},
          {"metrics_ticks", m.metrics_ticks},
          {"altitude_in_band_proportion", opt_json(m.altitude_in_band_proportion)},
          {"bank_in_band_proportion", opt_json(m.bank_in_band_proportion)},
          {"mean_heading_rollout_error_deg", opt_json(m.mean_heading_rollout_error_deg)},
          {"speed_in_band_proportion", opt_json(m.speed_in_band_proportion)},
          {"task_completion_time_s", opt_json(m.task_completion_time_s)}};
}

Json metric_deltas_to_json(const MetricDeltas& d) {
  return {{"altitude_in_band_proportion", opt_json(d.altitude_in_band_proportion)},
          {"bank_in_band_proportion", opt_json(d.bank_in_band_proportion)},
          {"mean_heading_rollout_error_deg", opt_json(d.mean_heading_rollout_error_deg)},
          {"speed_in_band_proportion", opt_json(d.speed_in_band_proportion)},
          {"task_completion_time_s", opt_json(d.task_completion_time_s)}};
}

}  // namespace aerocue
