#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerocue/session_engine.hpp"

namespace aerocue {

struct Tally {
  std::size_t ticks = 0;
  std::size_t passed = 0;

  double accuracy() const noexcept { return ticks == 0 ? 0.0 : static_cast<double>(passed) / ticks; }
};

struct FailureHistogram {
  std::size_t c1 = 0;  // stages missing
  std::size_t c2 = 0;  // schema or packet invariants
  std::size_t c3 = 0;  // disagreement with the deviation report
};

struct EvalReport {
  std::size_t logs = 0;
  std::map<std::string, Tally> per_task;        // task id
  std::map<std::string, Tally> per_condition;   // normal | abnormal
  Tally total;
  FailureHistogram failures;
  // Ticks whose stored verdict differs from the recomputed one.
  std::size_t stored_disagreements = 0;
};

// Published accuracies of the remote-model workflow, shown for comparison
// only. Not reproducible here.
struct ReferenceAccuracy {
  std::array<std::pair<std::string_view, double>, 4> per_task{{
      {"straight_level", 0.933},
      {"takeoff_climb", 0.955},
      {"steep_turn", 0.916},
      {"deadstick_landing", 0.926},
  }};
  double total = 0.932;
  double normal = 0.956;
  double abnormal = 0.928;
};

// Recomputes every report and verdict from the stored states and stage
// payloads; stored verdicts are only compared, never trusted. Throws EmptyLogSet.
EvalReport score_workflow(const std::vector<SessionLog>& logs);

Json eval_report_to_json(const EvalReport& r, bool with_reference = true);
std::string render_eval_table(const EvalReport& r, bool with_reference = true);

struct TrainingMetrics {
  std::string task_id;
  std::size_t metrics_ticks = 0;  // ticks spent in the metrics phase
  std::optional<double> altitude_in_band_proportion;
  std::optional<double> bank_in_band_proportion;
  std::optional<double> mean_heading_rollout_error_deg;
  std::optional<double> speed_in_band_proportion;
  std::optional<double> task_completion_time_s;  // empty if the trace ends first
};

// Proportions over the task's metrics phase. The rollout error is taken over
// the last phase with a heading envelope. Throws IncompleteTrace when the
// trace is empty or never reaches the metrics phase.
TrainingMetrics compute_training_metrics(const std::vector<TelemetryRecord>& trace, const TaskSpec& spec);
TrainingMetrics compute_training_metrics(const SessionLog& log);

struct MetricDeltas {
  std::optional<double> altitude_in_band_proportion;
  std::optional<double> bank_in_band_proportion;
  std::optional<double> mean_heading_rollout_error_deg;
  std::optional<double> speed_in_band_proportion;
  std::optional<double> task_completion_time_s;
};

// post - pre, per metric present in both.
MetricDeltas compare_runs(const TrainingMetrics& pre, const TrainingMetrics& post);

Json training_metrics_to_json(const TrainingMetrics& m);
Json metric_deltas_to_json(const MetricDeltas& d);

}  // namespace aerocue
