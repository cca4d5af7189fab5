#include "aerocue/guidance_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "aerocue/http_client.hpp"
#include "aerocue/resources.hpp"
#include "aerocue/schema.hpp"

namespace aerocue {

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string words(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Json metric_or_null(const std::optional<Metric>& m) { return m ? Json(metric_name(*m)) : Json(); }

std::optional<Metric> metric_field(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  auto m = metric_from_name(v.get<std::string>());
  if (!m) throw Error(Errc::MalformedResponse, std::string("unknown metric in ") + key);
  return m;
}

std::string action_phrase(const StickOp& op) {
  if (op.axis == StickAxis::x) return op.direction == StickDirection::plus ? "roll right" : "roll left";
  return op.direction == StickDirection::plus ? "ease back on the stick" : "ease the stick forward";
}

// One sentence naming the worst metric, its instrument and the fix.
std::string correction_sentence(const MetricDeviation& d) {
  const ControlMapping map = control_mapping(d.metric);
  const std::string what = capitalized(std::string(metric_words(d.metric)));
  const std::string amount = fmt1(std::abs(d.deviation));
  std::string text;
  if (d.metric == Metric::bank_deg) {
    const bool steep = std::abs(d.value) > std::abs(d.target);
    text = what + (steep ? " too steep by " : " too shallow by ") + amount;
  } else {
    text = what + (d.deviation > 0 ? " above target by " : " below target by ") + amount;
  }
  text += "; check the " + std::string(to_string(map.instrument)) + " and ";
  if (auto op = corrective_stick(d)) {
    text += action_phrase(*op);
    if (d.metric == Metric::bank_deg)
      text += std::abs(d.value) > std::abs(d.target) ? " to reduce bank" : " to increase bank";
  } else if (d.deviation < 0) {
    text += "lower the nose or add power";
  } else {
    text += "raise the nose or reduce power";
  }
  return text + ".";
}

std::string assessment_text(const MetricDeviation& d) {
  const std::string what(metric_words(d.metric));
  if (d.in_band) return what + " " + fmt1(d.value) + ", within " + fmt1(d.tolerance) + " of " + fmt1(d.target);
  return what + " " + fmt1(d.value) + ", " + fmt1(std::abs(d.deviation)) + " off " + fmt1(d.target) +
         " (tolerance " + fmt1(d.tolerance) + ")";
}

Json oracle_status(const DeviationReport& report) {
  StatusCheck s;
  s.tick = report.tick;
  s.status = expected_status(report);
  s.worst = report.worst;
  for (const auto& d : report.deviations) s.assessments.push_back({d.metric, d.in_band, assessment_text(d)});
  return status_check_payload(s);
}

Json oracle_guidance(const DeviationReport& report, const StatusCheck& status) {
  GuidanceText g;
  if (report.phase_event && report.phase_event->tendency) {
    g.pre_start = true;
    g.text = "Begin " + words(report.phase_event->phase_name) + ": " + action_phrase(*report.phase_event->tendency) + ".";
  } else if (status.status != FlightStatus::nominal && status.worst) {
    const MetricDeviation* d = report.find(*status.worst);
    if (d == nullptr) throw Error(Errc::MalformedResponse, "worst metric missing from report");
    g.focus_metric = d->metric;
    g.text = correction_sentence(*d);
  } else {
    g.text = "Holding " + words(report.phase_name) + " within standards.";
  }
  return guidance_payload(g);
}

Json oracle_format(const DeviationReport& report, const GuidanceText& g) {
  if (g.pre_start && report.phase_event && report.phase_event->tendency) {
    GuidancePacket p;
    p.trigger = Trigger::pre_start;
    p.ems_mode = EmsMode::swell;
    p.stick_op = report.phase_event->tendency;
    p.stick_op->magnitude = MagnitudeClass::light;
    p.rationale = g.text;
    return packet_payload(p);
  }
  if (g.focus_metric) {
    const MetricDeviation* d = report.find(*g.focus_metric);
    if (d == nullptr) throw Error(Errc::MalformedResponse, "focus metric missing from report");
    GuidancePacket p;
    p.trigger = Trigger::correction;
    p.ems_mode = EmsMode::rising;
    p.stick_op = corrective_stick(*d);
    p.instruments = {control_mapping(d->metric).instrument};
    p.rationale = g.text;
    return packet_payload(p);
  }
  return packet_payload(std::nullopt);
}

const std::string& cached_resource(const std::string& path) {
  static std::mutex mu;
  static std::map<std::string, std::string> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(path);
  if (it == cache.end()) it = cache.emplace(path, load_resource(path)).first;
  return it->second;
}

}  // namespace

std::string_view to_string(StageId s) noexcept {
  switch (s) {
    case StageId::status_check: return "status_check";
    case StageId::guidance: return "guidance";
    case StageId::format: return "format";
  }
  return "status_check";
}

std::optional<StageId> stage_from(std::string_view s) noexcept {
  for (StageId id : kStages)
    if (to_string(id) == s) return id;
  return std::nullopt;
}

std::string stage_schema_id(StageId s) { return std::string(to_string(s)) + ".v1"; }
std::string stage_prompt_id(StageId s) { return std::string(to_string(s)) + ".v1"; }

const Json& stage_schema(StageId s) {
  static const std::array<Json, 3> schemas = [] {
    std::array<Json, 3> out;
    for (StageId id : kStages) {
      out[stage_index(id)] = Json::parse(load_resource("schemas/" + stage_schema_id(id) + ".json"));
    }
    return out;
  }();
  return schemas[stage_index(s)];
}

const std::string& stage_system_prompt(StageId s) {
  return cached_resource("prompts/" + std::string(to_string(s)) + ".system.v1.txt");
}

const std::string& stage_user_template(StageId s) {
  return cached_resource("prompts/" + std::string(to_string(s)) + ".user.v1.txt");
}

std::string render_template(std::string_view tmpl, const Json& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    if (auto it = vars.find(key); it != vars.end()) {
      out += it->is_string() ? it->get<std::string>() : it->dump(2);
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string_view to_string(FlightStatus s) noexcept {
  switch (s) {
    case FlightStatus::nominal: return "nominal";
    case FlightStatus::deviation: return "deviation";
    case FlightStatus::critical: return "critical";
  }
  return "nominal";
}

std::optional<FlightStatus> status_from(std::string_view s) noexcept {
  if (s == "nominal") return FlightStatus::nominal;
  if (s == "deviation") return FlightStatus::deviation;
  if (s == "critical") return FlightStatus::critical;
  return std::nullopt;
}

std::string_view to_string(Instrument i) noexcept {
  switch (i) {
    case Instrument::altimeter: return "altimeter";
    case Instrument::attitude_indicator: return "attitude indicator";
    case Instrument::airspeed_indicator: return "airspeed indicator";
    case Instrument::heading_indicator: return "heading indicator";
    case Instrument::vertical_speed_indicator: return "vertical speed indicator";
  }
  return "altimeter";
}

std::optional<Instrument> instrument_from(std::string_view s) noexcept {
  for (Instrument i : {Instrument::altimeter, Instrument::attitude_indicator, Instrument::airspeed_indicator,
                       Instrument::heading_indicator, Instrument::vertical_speed_indicator}) {
    if (to_string(i) == s) return i;
  }
  return std::nullopt;
}

ControlMapping control_mapping(Metric m) noexcept {
  switch (m) {
    case Metric::altitude_ft: return {StickAxis::y, Instrument::altimeter};
    case Metric::pitch_deg: return {StickAxis::y, Instrument::attitude_indicator};
    case Metric::bank_deg: return {StickAxis::x, Instrument::attitude_indicator};
    case Metric::heading_deg: return {StickAxis::x, Instrument::heading_indicator};
    case Metric::vs_fpm: return {StickAxis::y, Instrument::vertical_speed_indicator};
    case Metric::ias_kt: return {std::nullopt, Instrument::airspeed_indicator};
    case Metric::gs_kt: return {std::nullopt, Instrument::airspeed_indicator};
    case Metric::accel_lon_g: return {std::nullopt, Instrument::airspeed_indicator};
    case Metric::accel_lat_g: return {std::nullopt, Instrument::attitude_indicator};
    case Metric::accel_vert_g: return {std::nullopt, Instrument::attitude_indicator};
  }
  return {};
}

MagnitudeClass magnitude_for(const MetricDeviation& d) noexcept {
  return (std::abs(d.deviation) >= kFirmRatio * d.tolerance || d.trend) ? MagnitudeClass::firm
                                                                         : MagnitudeClass::light;
}

std::optional<StickOp> corrective_stick(const MetricDeviation& d) noexcept {
  const auto axis = control_mapping(d.metric).axis;
  if (!axis || d.deviation == 0.0) return std::nullopt;
  StickOp op;
  op.axis = *axis;
  op.direction = d.deviation > 0 ? StickDirection::minus : StickDirection::plus;
  op.magnitude = magnitude_for(d);
  return op;
}

FlightStatus expected_status(const DeviationReport& r) noexcept {
  if (!r.any_out_of_band()) return FlightStatus::nominal;
  double worst = 0.0;
  for (const auto& d : r.deviations)
    if (!d.in_band) worst = std::max(worst, d.severity());
  return worst >= kCriticalSeverity ? FlightStatus::critical : FlightStatus::deviation;
}

Json status_check_payload(const StatusCheck& s) {
  Json assessments = Json::array();
  for (const auto& a : s.assessments)
    assessments.push_back({{"metric", metric_name(a.metric)}, {"in_band", a.in_band}, {"assessment", a.text}});
  return {{"status", to_string(s.status)}, {"worst_metric", metric_or_null(s.worst)}, {"assessments", assessments}};
}

StatusCheck status_check_from_payload(const Json& payload, std::int64_t tick) {
  try {
    StatusCheck s;
    s.tick = tick;
    auto st = status_from(payload.at("status").get<std::string>());
    if (!st) throw Error(Errc::MalformedResponse, "unknown status");
    s.status = *st;
    s.worst = metric_field(payload, "worst_metric");
    for (const auto& a : payload.at("assessments")) {
      auto m = metric_from_name(a.at("metric").get<std::string>());
      if (!m) throw Error(Errc::MalformedResponse, "unknown metric in assessments");
      s.assessments.push_back({*m, a.at("in_band").get<bool>(), a.at("assessment").get<std::string>()});
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("status check: ") + e.what());
  }
}

Json guidance_payload(const GuidanceText& g) {
  return {{"guidance", g.text}, {"focus_metric", metric_or_null(g.focus_metric)}, {"pre_start", g.pre_start}};
}

GuidanceText guidance_from_payload(const Json& payload) {
  try {
    GuidanceText g;
    g.text = payload.at("guidance").get<std::string>();
    g.focus_metric = metric_field(payload, "focus_metric");
    g.pre_start = payload.at("pre_start").get<bool>();
    return g;
  } catch (const Json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("guidance: ") + e.what());
  }
}

std::optional<std::string> packet_violation(const GuidancePacket& p) {
  if (p.trigger == Trigger::pre_start && p.ems_mode != EmsMode::swell) return "pre_start requires ems_mode 3";
  if (p.trigger == Trigger::correction && p.ems_mode != EmsMode::rising) return "correction requires ems_mode 2";
  if (p.trigger == Trigger::correction && p.instruments.empty()) return "correction names no instrument";
  return std::nullopt;
}

Json packet_payload(const std::optional<GuidancePacket>& p) {
  if (!p) return {{"packet", nullptr}};
  Json instruments = Json::array();
  for (Instrument i : p->instruments) instruments.push_back(to_string(i));
  return {{"packet",
           {{"trigger", to_string(p->trigger)},
            {"ems_mode", mode_number(p->ems_mode)},
            {"stick_op", p->stick_op ? stick_op_to_json(*p->stick_op) : Json()},
            {"instruments", instruments},
            {"rationale", p->rationale}}}};
}

std::optional<GuidancePacket> packet_from_payload(const Json& payload, std::int64_t tick) {
  GuidancePacket p;
  try {
    const Json& j = payload.at("packet");
    if (j.is_null()) return std::nullopt;
    p.tick = tick;
    auto trigger = trigger_from(j.at("trigger").get<std::string>());
    auto mode = mode_from_number(j.at("ems_mode").get<int>());
    if (!trigger || !mode) throw Error(Errc::MalformedResponse, "bad trigger or ems_mode");
    p.trigger = *trigger;
    p.ems_mode = *mode;
    if (const Json& op = j.at("stick_op"); !op.is_null()) {
      p.stick_op = stick_op_from_json(op);
      if (!p.stick_op) throw Error(Errc::MalformedResponse, "bad stick_op");
    }
    for (const auto& name : j.at("instruments")) {
      auto i = instrument_from(name.get<std::string>());
      if (!i) throw Error(Errc::MalformedResponse, "instrument outside vocabulary");
      p.instruments.push_back(*i);
    }
    p.rationale = j.at("rationale").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("packet: ") + e.what());
  }
  if (auto v = packet_violation(p)) throw Error(Errc::InvariantViolation, *v);
  return p;
}

Json packet_to_json(const GuidancePacket& p) {
  Json j = packet_payload(p).at("packet");
  j["tick"] = p.tick;
  j["provenance"] = p.provenance;
  return j;
}

BackendResponse OracleBackend::complete(const BackendRequest& request, Clock::time_point) {
  const DeviationReport report = report_from_json(request.inputs.at("report"));
  BackendResponse r;
  r.backend_id = id();
  switch (request.stage) {
    case StageId::status_check:
      r.payload = oracle_status(report);
      break;
    case StageId::guidance:
      r.payload = oracle_guidance(report, status_check_from_payload(request.inputs.at("status"), report.tick));
      break;
    case StageId::format:
      r.payload = oracle_format(report, guidance_from_payload(request.inputs.at("guidance")));
      break;
  }
  r.raw_text = r.payload.dump();
  return r;
}

RemoteChatBackend::RemoteChatBackend(Options options) : options_(std::move(options)) {}

BackendResponse RemoteChatBackend::complete(const BackendRequest& request, Clock::time_point deadline) {
  std::string name = request.schema_id;
  std::replace(name.begin(), name.end(), '.', '_');
  const Json body = {
      {"model", options_.model},
      {"temperature", 0},
      {"messages",
       Json::array({{{"role", "system"}, {"content", request.system_prompt}},
                    {{"role", "user"}, {"content", request.user_prompt}}})},
      {"response_format",
       {{"type", "json_schema"},
        {"json_schema", {{"name", name}, {"schema", stage_schema(request.stage)}, {"strict", true}}}}}};
  HttpHeaders headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);

  const auto t0 = Clock::now();
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) throw Error(Errc::BackendTimeout, "deadline passed before request");
    const HttpResult res = http_post_json(options_.base_url, "/v1/chat/completions", body.dump(), headers,
                                          std::min(options_.timeout, remaining));
    if (res.failure == HttpResult::Failure::timeout) throw Error(Errc::BackendTimeout, res.error);
    if (res.failure != HttpResult::Failure::none) {
      last_error = res.error;
      continue;
    }
    if (res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      continue;
    }
    if (!res.ok()) throw Error(Errc::ProviderUnavailable, "HTTP " + std::to_string(res.status));

    BackendResponse r;
    r.backend_id = id();
    try {
      const Json reply = Json::parse(res.body);
      r.raw_text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw Error(Errc::MalformedResponse, std::string("chat reply: ") + e.what());
    }
    try {
      r.payload = Json::parse(r.raw_text);
    } catch (const Json::exception& e) {
      throw Error(Errc::MalformedResponse, std::string("content is not JSON: ") + e.what());
    }
    r.latency_ms = ms_since(t0);
    return r;
  }
  throw Error(Errc::ProviderUnavailable, options_.base_url + ": " + last_error);
}

DelayedBackend::DelayedBackend(Backend& inner, std::chrono::milliseconds delay, std::set<StageId> stages)
    : inner_(inner), delay_(delay), stages_(std::move(stages)) {}

BackendResponse DelayedBackend::complete(const BackendRequest& request, Clock::time_point deadline) {
  const bool delayed = stages_.empty() || stages_.count(request.stage) > 0;
  if (delayed) std::this_thread::sleep_for(delay_);
  BackendResponse r = inner_.complete(request, deadline);
  if (delayed) r.latency_ms += static_cast<double>(delay_.count());
  r.backend_id = id();
  return r;
}

StageRecords empty_stage_records() {
  StageRecords out;
  for (StageId s : kStages) out[stage_index(s)].stage = s;
  return out;
}

Json stage_record_to_json(const StageRecord& r) {
  return {{"stage", to_string(r.stage)},
          {"completed", r.completed},
          {"payload", r.payload},
          {"latency_ms", r.latency_ms},
          {"backend", r.backend_id},
          {"error", r.error.empty() ? Json() : Json(r.error)}};
}

StageRecord stage_record_from_json(const Json& j) {
  StageRecord r;
  auto s = stage_from(j.at("stage").get<std::string>());
  if (!s) throw Error(Errc::CorruptLog, "unknown stage");
  r.stage = *s;
  r.completed = j.at("completed").get<bool>();
  r.payload = j.at("payload");
  r.latency_ms = j.at("latency_ms").get<double>();
  r.backend_id = j.at("backend").get<std::string>();
  if (const auto& e = j.at("error"); !e.is_null()) r.error = e.get<std::string>();
  return r;
}

double ChainResult::latency_ms() const noexcept {
  double total = 0.0;
  for (const auto& s : stages) total += s.latency_ms;
  return total;
}

GuidancePipeline::GuidancePipeline(TaskSpec spec, Backend& backend, const VectorIndex* index, Embedder* embedder,
                                   PipelineOptions options)
    : spec_(std::move(spec)), backend_(backend), index_(index), embedder_(embedder), options_(options) {}

AlignedContext GuidancePipeline::stage_align(const DeviationReport& report) {
  AlignedContext empty;
  empty.degraded = true;
  if (index_ == nullptr || embedder_ == nullptr) return empty;
  try {
    const auto query = embedder_->embed(retrieval_query(spec_, report.phase_name, report.worst));
    return build_context(index_->search(query, options_.top_k), options_.context_budget);
  } catch (const Error&) {
    return empty;
  }
}

StageRecord GuidancePipeline::call_stage(StageId stage, std::int64_t tick, const Json& inputs,
                                         Clock::time_point deadline, Clock::time_point started) {
  StageRecord rec;
  rec.stage = stage;
  rec.backend_id = backend_.id();
  BackendRequest req;
  req.stage = stage;
  req.tick = tick;
  req.prompt_id = stage_prompt_id(stage);
  req.schema_id = stage_schema_id(stage);
  req.system_prompt = stage_system_prompt(stage);
  req.user_prompt = render_template(stage_user_template(stage), inputs);
  req.inputs = inputs;

  const auto t0 = Clock::now();
  try {
    BackendResponse resp = backend_.complete(req, deadline);
    rec.backend_id = resp.backend_id;
    rec.latency_ms = resp.latency_ms;
    if (Clock::now() > deadline) {
      rec.latency_ms = std::max(resp.latency_ms, ms_since(started));
      rec.error = std::string(to_string(Errc::BackendTimeout));
      return rec;
    }
    rec.completed = true;
    rec.payload = std::move(resp.payload);
    if (!schema_valid(stage_schema(stage), rec.payload)) rec.error = std::string(to_string(Errc::MalformedResponse));
  } catch (const Error& e) {
    rec.latency_ms = ms_since(t0);
    rec.error = std::string(to_string(e.code()));
  }
  return rec;
}

ChainResult GuidancePipeline::run_chain(const FlightState& state, const DeviationReport& report,
                                        Clock::time_point deadline, const StageObserver& observer) {
  const auto started = Clock::now();
  ChainResult out;
  out.tick = report.tick;
  out.context = stage_align(report);

  Json inputs = {{"task", spec_.display_name},
                 {"phase", report.phase_name},
                 {"state", state_to_json(state)},
                 {"report", report_to_json(report)},
                 {"context", out.context.text}};

  auto fail = [&](StageRecord& rec, Errc code, std::string detail) {
    if (rec.error.empty()) rec.error = std::string(to_string(code));
    out.error = code;
    out.error_detail = std::move(detail);
  };
  auto errc_of = [](const std::string& name) {
    for (int i = 0; i <= static_cast<int>(Errc::Io); ++i)
      if (to_string(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
    return Errc::MalformedResponse;
  };

  for (StageId stage : kStages) {
    StageRecord& rec = out.stages[stage_index(stage)];
    rec = call_stage(stage, report.tick, inputs, deadline, started);
    if (rec.error.empty()) {
      try {
        switch (stage) {
          case StageId::status_check:
            out.status = status_check_from_payload(rec.payload, report.tick);
            inputs["status"] = rec.payload;
            break;
          case StageId::guidance:
            out.guidance = guidance_from_payload(rec.payload);
            inputs["guidance"] = rec.payload;
            break;
          case StageId::format:
            out.packet = packet_from_payload(rec.payload, report.tick);
            if (out.packet) out.packet->provenance = out.context.provenance;
            break;
        }
      } catch (const Error& e) {
        fail(rec, e.code(), e.detail());
      }
    } else {
      fail(rec, errc_of(rec.error), std::string(to_string(stage)) + " failed");
    }
    if (observer) observer(rec);
    if (out.error) {
      out.packet.reset();
      break;
    }
  }
  return out;
}

ChainRunner::ChainRunner(GuidancePipeline& pipeline) : pipeline_(pipeline) {}

ChainRunner::~ChainRunner() {
  if (inflight_.valid()) inflight_.wait();
}

ChainResult ChainRunner::run(const FlightState& state, const DeviationReport& report) {
  const auto launched = Clock::now();
  const auto deadline = launched + pipeline_.options().deadline;
  ChainResult degraded;
  degraded.tick = report.tick;
  degraded.error = Errc::BackendTimeout;

  if (inflight_.valid()) {
    if (inflight_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
      degraded.error_detail = "previous chain still running";
      degraded.stages[0].error = std::string(to_string(Errc::BackendTimeout));
      return degraded;
    }
    inflight_.get();
    ++discarded_;
  }

  auto progress = std::make_shared<Progress>();
  inflight_ = std::async(std::launch::async, [this, state, report, deadline, progress] {
    return pipeline_.run_chain(state, report, deadline, [progress](const StageRecord& r) {
      std::lock_guard lock(progress->mu);
      progress->done.push_back(r);
    });
  });
  if (inflight_.wait_until(deadline) == std::future_status::ready) return inflight_.get();

  degraded.error_detail = "chain exceeded deadline";
  std::lock_guard lock(progress->mu);
  std::size_t next = 0;
  for (const auto& r : progress->done) {
    degraded.stages[stage_index(r.stage)] = r;
    next = stage_index(r.stage) + 1;
  }
  if (next < degraded.stages.size()) {
    auto& late = degraded.stages[next];
    late.backend_id = pipeline_.backend().id();
    late.error = std::string(to_string(Errc::BackendTimeout));
    late.latency_ms = ms_since(launched);
  }
  return degraded;
}

ValidatorVerdict validate_record(const DeviationReport& report, const StageRecords& stages) {
  ValidatorVerdict v;
  v.c1 = std::all_of(stages.begin(), stages.end(),
                     [](const StageRecord& s) { return s.completed && !s.payload.is_null(); });
  if (!v.c1) v.notes.push_back("C1: incomplete chain");

  // C2 over whatever was produced; parsed payloads feed C3.
  v.c2 = true;
  std::optional<StatusCheck> status;
  std::optional<GuidanceText> guidance;
  std::optional<std::optional<GuidancePacket>> packet;
  for (StageId id : kStages) {
    const StageRecord& s = stages[stage_index(id)];
    if (s.payload.is_null()) continue;
    const auto errs = schema_errors(stage_schema(id), s.payload);
    if (!errs.empty()) {
      v.c2 = false;
      v.notes.push_back("C2: " + std::string(to_string(id)) + errs.front());
      continue;
    }
    try {
      switch (id) {
        case StageId::status_check: status = status_check_from_payload(s.payload, report.tick); break;
        case StageId::guidance: guidance = guidance_from_payload(s.payload); break;
        case StageId::format: packet = packet_from_payload(s.payload, report.tick); break;
      }
    } catch (const Error& e) {
      v.c2 = false;
      v.notes.push_back("C2: " + std::string(to_string(id)) + ": " + e.detail());
    }
  }

  v.c3 = true;
  auto c3_fail = [&](std::string why) {
    v.c3 = false;
    v.notes.push_back("C3: " + std::move(why));
  };
  const bool out_of_band = report.any_out_of_band();
  const bool expect_pre_start = report.phase_event && report.phase_event->tendency;
  const MetricDeviation* worst = report.worst ? report.find(*report.worst) : nullptr;

  if (status) {
    if (status->status != expected_status(report)) c3_fail("status does not match envelope flags");
    if (status->worst != report.worst) c3_fail("worst metric does not match report");
    for (const auto& a : status->assessments) {
      const MetricDeviation* d = report.find(a.metric);
      if (d == nullptr || d->in_band != a.in_band) c3_fail("assessment of " + std::string(metric_name(a.metric)) + " contradicts report");
    }
  }
  if (guidance) {
    if (guidance->pre_start != expect_pre_start) c3_fail("pre_start flag does not match phase transition");
    if (!expect_pre_start && out_of_band && guidance->focus_metric != report.worst) c3_fail("guidance does not focus on the worst metric");
    if (!out_of_band && !expect_pre_start && guidance->focus_metric) c3_fail("guidance on a nominal tick");
  }
  if (packet) {
    const auto& p = *packet;
    if (expect_pre_start) {
      if (!p || p->trigger != Trigger::pre_start) {
        c3_fail("phase transition without pre-start");
      } else {
        const StickOp& want = *report.phase_event->tendency;
        if (!p->stick_op || p->stick_op->axis != want.axis || p->stick_op->direction != want.direction)
          c3_fail("pre-start direction differs from phase tendency");
      }
    } else if (out_of_band && worst != nullptr) {
      if (!p || p->trigger != Trigger::correction) {
        c3_fail("deviation without correction");
      } else {
        const ControlMapping map = control_mapping(worst->metric);
        if (map.axis) {
          const int want = worst->deviation > 0 ? -1 : 1;
          if (!p->stick_op || p->stick_op->axis != *map.axis) c3_fail("stick axis does not control the worst metric");
          else if (p->stick_op->sign() != want) c3_fail("stick direction does not oppose the deviation");
        } else if (p->stick_op) {
          c3_fail("stick cue for a voice-only metric");
        }
        for (Instrument i : p->instruments)
          if (i != map.instrument) c3_fail("instrument " + std::string(to_string(i)) + " does not show the worst metric");
      }
    } else if (p) {
      c3_fail(p->trigger == Trigger::pre_start ? "pre-start outside a phase transition" : "correction on a nominal tick");
    }
  }
  return v;
}

Json verdict_to_json(const ValidatorVerdict& v) {
  return {{"c1", v.c1}, {"c2", v.c2}, {"c3", v.c3}, {"overall", v.overall()}, {"notes", v.notes}};
}

ValidatorVerdict verdict_from_json(const Json& j) {
  ValidatorVerdict v;
  v.c1 = j.at("c1").get<bool>();
  v.c2 = j.at("c2").get<bool>();
  v.c3 = j.at("c3").get<bool>();
  v.notes = j.value("notes", std::vector<std::string>{});
  return v;
}

}  // namespace aerocue
