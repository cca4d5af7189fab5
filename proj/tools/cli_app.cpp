#include "cli_app.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aerocue/error.hpp"
#include "aerocue/eval_harness.hpp"
#include "aerocue/gateway.hpp"

namespace aerocue::cli {

namespace {

std::vector<std::string> task_names() { return {kTaskIds.begin(), kTaskIds.end()}; }

template <typename T>
void put(Patch& p, const char* pointer, const std::optional<T>& v) {
  if (v) p[Json::json_pointer(pointer)] = *v;
}

void add_session_flags(CLI::App* sub, SessionFlags& f, bool batch) {
  sub->add_option("--task", f.task, "task id")->check(CLI::IsMember(task_names()));
  sub->add_option("--scenario", f.scenario, "built-in scenario name or scenario JSON file");
  sub->add_option("--backend", f.backend, "guidance backend")->check(CLI::IsMember({"oracle", "remote"}));
  sub->add_option("--assist", f.assist, "stimulation cues on or off")->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--seed", f.seed, "scenario and trainee seed");
  sub->add_option("--profile", f.profile, "calibration profile JSON");
  sub->add_option("--deadline-ms", f.deadline_ms, "per-tick pipeline deadline");
  sub->add_option("--ems-duration-ms", f.ems_duration_ms, "cue duration");
  sub->add_option("--device", f.device, "stimulator: sim or tcp://host:port");
  sub->add_option("--index", f.index, "saved knowledge index (default: built-in corpus)");
  sub->add_option("--base-url", f.base_url, "remote chat endpoint");
  sub->add_option("--model", f.model, "remote chat model");
  sub->add_option("--timeout-ms", f.timeout_ms, "remote request timeout");
  sub->add_option("--embed-url", f.embed_url, "remote embedding endpoint");
  sub->add_option("--embed-model", f.embed_model, "remote embedding model");
  sub->add_option("--log", f.log, "write the session log (JSON lines) here");
  if (batch) {
    sub->add_option("--telemetry", f.telemetry, "JSON-lines telemetry file replacing the simulator");
  } else {
    sub->add_option("--tick-ms", f.tick_ms, "wall-clock pacing per tick");
    f.interactive_opt = sub->add_flag("--interactive", f.interactive, "take stick input from the client");
    sub->add_option("--host", f.host, "bind address");
    sub->add_option("--port", f.port, "listen port (0 picks a free one)");
    sub->add_option("--ui-dir", f.ui_dir, "static UI bundle served at /");
  }
}

void print_json(std::ostream& out, const Json& j) { out << j.dump(2) << "\n"; }

std::string fixed(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v) { return v ? fixed(*v) : "-"; }

Settings settings_for(const Invocation& inv, const std::map<std::string, std::string>& env) {
  std::string path = inv.config_path;
  if (path.empty())
    if (auto it = env.find("AEROCUE_CONFIG"); it != env.end()) path = it->second;
  const Patch file = path.empty() ? Patch::object() : patch_from_file(path);
  return resolve(file, patch_from_env(env), flags_to_patch(inv.flags));
}

// Blocks SIGINT and SIGTERM in this thread and every thread created after,
// so the caller can sigwait for them.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

int wait_stop_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

int cmd_kb_build(const Invocation& inv, const Settings& s, Streams io) {
  const auto docs = load_corpus_dir(inv.kb_dir);
  if (docs.empty()) throw Error(Errc::EmptyDocument, "no .md or .txt documents under " + inv.kb_dir);
  std::unique_ptr<Embedder> embedder;
  if (inv.kb_embedder == "remote")
    embedder = std::make_unique<RemoteEmbedder>(s.session.embed);
  else
    embedder = std::make_unique<HashEmbedder>(inv.kb_dimension);
  const VectorIndex index = build_index(docs, *embedder, ChunkingParams{inv.kb_max_chunk_chars, 0});
  index.save(inv.kb_out);
  if (inv.json) {
    print_json(io.out, {{"documents", docs.size()},
                        {"chunks", index.size()},
                        {"dimension", index.dimension()},
                        {"embedder", index.embedder_name()},
                        {"out", inv.kb_out}});
  } else {
    io.out << "indexed " << index.size() << " chunks from " << docs.size() << " documents ("
           << index.embedder_name() << ", d=" << index.dimension() << ") -> " << inv.kb_out << "\n";
  }
  return 0;
}

int cmd_kb_query(const Invocation& inv, const Settings& s, Streams io) {
  std::unique_ptr<Embedder> embedder;
  VectorIndex index;
  if (s.session.index.empty()) {
    embedder = std::make_unique<HashEmbedder>();
    index = build_index(load_builtin_corpus(), *embedder);
  } else {
    index = VectorIndex::load(s.session.index);
    embedder = embedder_for(index, s.session.embed);
  }
  SearchFilter filter;
  if (!inv.kb_tier.empty()) filter.tier = tier_from(inv.kb_tier);
  filter.tags = inv.kb_tags;
  const auto hits = index.search(embedder->embed(inv.kb_text), inv.kb_k, filter);
  if (inv.json) {
    Json arr = Json::array();
    for (const auto& h : hits)
      arr.push_back({{"rank", h.rank},
                     {"score", h.score},
                     {"chunk_id", h.chunk.chunk_id},
                     {"tier", std::string(to_string(h.chunk.tier))},
                     {"title", h.chunk.title},
                     {"text", h.chunk.text}});
    print_json(io.out, {{"query", inv.kb_text}, {"hits", arr}});
    return 0;
  }
  if (hits.empty()) io.out << "no matching chunks\n";
  for (const auto& h : hits) {
    std::string snippet = h.chunk.text.substr(0, 140);
    for (char& c : snippet)
      if (c == '\n') c = ' ';
    io.out << h.rank << ". " << fixed(h.score) << "  " << h.chunk.chunk_id << " [" << to_string(h.chunk.tier)
           << "]\n   " << snippet << (h.chunk.text.size() > 140 ? "..." : "") << "\n";
  }
  return 0;
}

// Ramps each channel from zero in fixed steps; the operator marks the first
// sensation, the first visible movement and the comfort limit.
int cmd_calibrate(const Invocation& inv, Streams io) {
  if (!(inv.cal_step_ma > 0.0)) throw Error(Errc::ConfigInvalid, "--step-ma must be positive");
  CalibrationProfile p;
  p.subject_id = inv.cal_subject;
  p.ceiling_ma = inv.cal_ceiling_ma.value_or(CalibrationProfile::default_profile().ceiling_ma);
  if (!(p.ceiling_ma > 0.0)) throw Error(Errc::ConfigInvalid, "--ceiling-ma must be positive");
  io.err << "At each level answer: enter = nothing new, p = first sensation, m = visible movement,\n"
            "c = comfort limit reached, s = skip channel, q = abort.\n";
  for (const std::string& name : inv.cal_channels) {
    const Channel ch = *channel_from(name);
    std::optional<double> perception, motion, comfort;
    const int steps = static_cast<int>(p.ceiling_ma / inv.cal_step_ma + 1e-9);
    bool skipped = false;
    for (int i = 1; i <= steps && !comfort && !skipped;) {
      const double level = i * inv.cal_step_ma;
      io.err << "[" << name << "] " << fixed(level, 1) << " mA > " << std::flush;
      std::string line;
      if (!std::getline(io.in, line)) throw Error(Errc::Io, "calibration input ended on channel " + name);
      line.erase(0, line.find_first_not_of(" \t\r"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (line == "q") throw Error(Errc::Io, "calibration aborted");
      if (line == "s") {
        skipped = true;
      } else if (line == "p" && !perception) {
        perception = level;
        ++i;
      } else if (line == "m" && perception && !motion) {
        motion = level;
        ++i;
      } else if (line == "c" && motion) {
        comfort = level;
      } else if (line.empty() || line == "n") {
        ++i;
      } else {
        io.err << "  expected " << (!perception ? "p" : !motion ? "m" : "c") << ", enter, s or q\n";
      }
    }
    if (skipped || !motion) {
      io.err << "[" << name << "] left uncalibrated\n";
      continue;
    }
    p.channels[static_cast<std::size_t>(ch)] = ChannelCalibration{*perception, *motion, comfort.value_or(p.ceiling_ma)};
  }
  bool any = false;
  for (const auto& c : p.channels) any = any || c.has_value();
  if (!any) throw Error(Errc::InvalidProfile, "no channel was calibrated");
  p.validate();
  const Json j = profile_to_json(p);
  if (inv.cal_out.empty()) {
    print_json(io.out, j);
    return 0;
  }
  std::ofstream f(inv.cal_out);
  if (!f) throw Error(Errc::Io, "cannot write " + inv.cal_out);
  f << j.dump(2) << "\n";
  if (!f) throw Error(Errc::Io, "cannot write " + inv.cal_out);
  if (inv.json) {
    print_json(io.out, {{"out", inv.cal_out}, {"profile", j}});
  } else {
    io.out << "profile for " << p.subject_id << " -> " << inv.cal_out << "\n";
    for (Channel c : kAllChannels) {
      const auto& cal = p.channels[static_cast<std::size_t>(c)];
      if (!cal) continue;
      io.out << "  " << to_string(c) << ": perception " << fixed(cal->perception_threshold_ma, 1) << " mA, motion "
             << fixed(cal->motion_threshold_ma, 1) << " mA, comfort " << fixed(cal->max_comfort_ma, 1) << " mA\n";
    }
  }
  return 0;
}

int cmd_run(const Invocation& inv, const Settings& s, Streams io) {
  const SessionLog log = run_session(s.session);
  std::size_t commands = 0, rejected = 0, voice = 0, passed = 0;
  for (const auto& r : log.records) {
    commands += r.commands.size();
    rejected += r.rejected.size();
    voice += r.voice.size();
    passed += r.verdict.overall();
  }
  std::optional<TrainingMetrics> metrics;
  try {
    metrics = compute_training_metrics(log);
  } catch (const Error& e) {
    if (e.code() != Errc::IncompleteTrace) throw;
  }
  const std::string scenario = s.session.resolved_scenario();
  if (inv.json) {
    Json j = {{"task", log.header.task_id},
              {"scenario", scenario},
              {"condition", std::string(to_string(log.header.condition))},
              {"backend", log.header.backend_id},
              {"assist", s.session.assist},
              {"seed", s.session.seed},
              {"ticks", log.records.size()},
              {"commands", commands},
              {"rejected", rejected},
              {"voice", voice},
              {"validator_passed", passed},
              {"end", log.end_reason},
              {"metrics", metrics ? training_metrics_to_json(*metrics) : Json()},
              {"log", s.session.log.empty() ? Json() : Json(s.session.log)}};
    print_json(io.out, j);
    return 0;
  }
  io.out << log.header.task_id << " / " << scenario << " (" << to_string(log.header.condition) << "), backend "
         << log.header.backend_id << ", assist " << (s.session.assist ? "on" : "off") << ", seed " << s.session.seed
         << "\n";
  io.out << "ticks " << log.records.size() << ", commands " << commands << " (rejected " << rejected << "), voice "
         << voice << ", validator " << passed << "/" << log.records.size() << "\n";
  if (metrics)
    io.out << "in band: altitude " << opt_fixed(metrics->altitude_in_band_proportion) << ", bank "
           << opt_fixed(metrics->bank_in_band_proportion) << ", speed " << opt_fixed(metrics->speed_in_band_proportion)
           << "; rollout error " << opt_fixed(metrics->mean_heading_rollout_error_deg) << " deg; completion "
           << opt_fixed(metrics->task_completion_time_s) << " s\n";
  if (!s.session.log.empty()) io.out << "log: " << s.session.log << "\n";
  return 0;
}

int cmd_serve(const Invocation& inv, const Settings& s, Streams io) {
  s.session.validate();
  const sigset_t set = block_stop_signals();
  GatewayOptions o;
  o.host = s.host;
  o.port = s.port;
  o.ui_dir = s.ui_dir;
  o.defaults = s.session;
  Gateway gw(o);
  if (inv.json)
    io.out << Json{{"host", s.host}, {"port", gw.port()}}.dump() << std::endl;
  else
    io.out << "gateway listening on http://" << s.host << ":" << gw.port() << std::endl;
  const int sig = wait_stop_signal(set);
  gw.shutdown();
  if (!inv.json) io.out << "stopped on signal " << sig << std::endl;
  return 0;
}

int cmd_replay(const Invocation& inv, Streams io) {
  const SessionLog log = load_log(inv.replay_log);
  const ReplayResult r = replay(log);
  if (inv.json) {
    Json arr = Json::array();
    for (const auto& m : r.mismatches) arr.push_back({{"tick", m.tick}, {"field", m.field}, {"detail", m.detail}});
    print_json(io.out, {{"log", inv.replay_log}, {"ticks", r.ticks}, {"mismatches", arr}});
  } else {
    io.out << inv.replay_log << ": " << r.ticks << " ticks, " << r.mismatches.size() << " mismatches\n";
    for (const auto& m : r.mismatches) io.out << "  tick " << m.tick << " " << m.field << ": " << m.detail << "\n";
  }
  return r.mismatches.empty() ? 0 : 1;
}

int cmd_eval(const Invocation& inv, Streams io) {
  std::vector<SessionLog> logs;
  for (const auto& path : inv.eval_logs) logs.push_back(load_log(path));
  const EvalReport report = score_workflow(logs);
  const bool ref = !inv.eval_no_reference;
  std::vector<std::pair<std::string, std::optional<TrainingMetrics>>> metrics;
  if (inv.eval_metrics) {
    for (std::size_t i = 0; i < logs.size(); ++i) {
      std::optional<TrainingMetrics> m;
      try {
        m = compute_training_metrics(logs[i]);
      } catch (const Error& e) {
        if (e.code() != Errc::IncompleteTrace) throw;
      }
      metrics.emplace_back(inv.eval_logs[i], m);
    }
  }
  if (inv.json) {
    Json j = eval_report_to_json(report, ref);
    if (inv.eval_metrics) {
      Json arr = Json::array();
      for (const auto& [path, m] : metrics) arr.push_back({{"log", path}, {"metrics", m ? training_metrics_to_json(*m) : Json()}});
      j["metrics"] = arr;
    }
    print_json(io.out, j);
    return 0;
  }
  io.out << render_eval_table(report, ref);
  if (inv.eval_metrics) {
    io.out << "\nlog  altitude  bank  speed  rollout_deg  completion_s\n";
    for (const auto& [path, m] : metrics) {
      if (!m) {
        io.out << path << "  (metrics phase never reached)\n";
        continue;
      }
      io.out << path << "  " << opt_fixed(m->altitude_in_band_proportion) << "  " << opt_fixed(m->bank_in_band_proportion)
             << "  " << opt_fixed(m->speed_in_band_proportion) << "  " << opt_fixed(m->mean_heading_rollout_error_deg)
             << "  " << opt_fixed(m->task_completion_time_s) << "\n";
    }
  }
  return 0;
}

int cmd_device_sim(const Invocation& inv, Streams io) {
  const sigset_t set = block_stop_signals();
  DeviceServer server(inv.sim_host, inv.sim_port);
  if (inv.json)
    io.out << Json{{"host", inv.sim_host}, {"port", server.port()}}.dump() << std::endl;
  else
    io.out << "device simulator listening on tcp://" << inv.sim_host << ":" << server.port() << std::endl;
  wait_stop_signal(set);
  server.stop();
  if (inv.json)
    io.out << Json{{"acked", server.frames_acked()}, {"dropped", server.frames_dropped()}}.dump() << std::endl;
  else
    io.out << "frames acked " << server.frames_acked() << ", dropped " << server.frames_dropped() << std::endl;
  return 0;
}

std::string env_footer() {
  std::string s = "Configuration: flags > AEROCUE_* environment > --config file (or AEROCUE_CONFIG) > defaults.\n"
                  "Environment:\n";
  for (const auto& [name, help] : env_variables()) s += "  " + name + "  " + help + "\n";
  return s;
}

}  // namespace

Patch flags_to_patch(const SessionFlags& f) {
  Patch p = Json::object();
  put(p, "/task", f.task);
  put(p, "/scenario", f.scenario);
  put(p, "/telemetry", f.telemetry);
  put(p, "/backend", f.backend);
  if (f.assist) p["assist"] = *f.assist == "on";
  put(p, "/remote/base_url", f.base_url);
  put(p, "/remote/model", f.model);
  put(p, "/remote/api_key", f.api_key);
  put(p, "/remote/timeout_ms", f.timeout_ms);
  put(p, "/embed/base_url", f.embed_url);
  put(p, "/embed/model", f.embed_model);
  put(p, "/device", f.device);
  put(p, "/profile", f.profile);
  put(p, "/index", f.index);
  put(p, "/log", f.log);
  put(p, "/seed", f.seed);
  put(p, "/deadline_ms", f.deadline_ms);
  put(p, "/ems_duration_ms", f.ems_duration_ms);
  put(p, "/tick_ms", f.tick_ms);
  if (f.interactive_opt != nullptr && f.interactive_opt->count() > 0) p["interactive"] = f.interactive;
  put(p, "/gateway/host", f.host);
  put(p, "/gateway/port", f.port);
  put(p, "/gateway/ui_dir", f.ui_dir);
  return p;
}

std::unique_ptr<CLI::App> make_app(Invocation& inv) {
  auto app = std::make_unique<CLI::App>("Kinesthetic flight-training assistant: sessions, gateway, knowledge base, evaluation",
                                        "aerocue");
  app->require_subcommand(1);
  app->add_flag("--json", inv.json, "machine-readable JSON output");
  app->add_option("--config", inv.config_path, "JSON config file (also AEROCUE_CONFIG)");
  app->footer(env_footer());

  auto* kb = app->add_subcommand("kb", "knowledge base: build an index or query one");
  kb->require_subcommand(1);
  auto* build = kb->add_subcommand("build", "chunk and embed a document directory into an index file");
  build->add_option("dir", inv.kb_dir, "directory of .md / .txt documents with front matter")
      ->required()
      ->check(CLI::ExistingDirectory);
  build->add_option("--out,-o", inv.kb_out, "index file to write")->required();
  build->add_option("--embedder", inv.kb_embedder, "hash (offline) or remote")->capture_default_str()
      ->check(CLI::IsMember({"hash", "remote"}));
  build->add_option("--dimension", inv.kb_dimension, "hash embedder dimension")->capture_default_str()->check(CLI::Range(1, 65536));
  build->add_option("--max-chunk-chars", inv.kb_max_chunk_chars, "chunk size limit")->capture_default_str()->check(CLI::Range(50, 100000));
  build->add_option("--embed-url", inv.flags.embed_url, "remote embedding endpoint");
  build->add_option("--embed-model", inv.flags.embed_model, "remote embedding model");

  auto* query = kb->add_subcommand("query", "top-k chunks for a text query");
  query->add_option("text", inv.kb_text, "query text")->required();
  query->add_option("-k", inv.kb_k, "number of hits")->capture_default_str()->check(CLI::Range(1, 1000));
  query->add_option("--tier", inv.kb_tier, "only this knowledge tier")
      ->check(CLI::IsMember({"basic", "aircraft_type", "mission_specific"}));
  query->add_option("--tag", inv.kb_tags, "only chunks carrying this tag (repeatable)");
  query->add_option("--index", inv.flags.index, "saved index (default: built-in corpus)");
  query->add_option("--embed-url", inv.flags.embed_url, "remote embedding endpoint");
  query->add_option("--embed-model", inv.flags.embed_model, "remote embedding model");

  auto* cal = app->add_subcommand("calibrate", "per-channel threshold ramp; answers are read from stdin");
  cal->add_option("--subject", inv.cal_subject, "subject id")->capture_default_str();
  cal->add_option("--channel", inv.cal_channels, "channels to calibrate (repeatable)")->capture_default_str()
      ->check(CLI::IsMember({"fwd", "back", "left", "right"}));
  cal->add_option("--step-ma", inv.cal_step_ma, "ramp step")->capture_default_str();
  cal->add_option("--ceiling-ma", inv.cal_ceiling_ma, "hard current ceiling (default 25)");
  cal->add_option("--out,-o", inv.cal_out, "profile file to write (default: stdout)");

  auto* run = app->add_subcommand("run", "batch session with the synthetic trainee or a telemetry file");
  add_session_flags(run, inv.flags, true);

  auto* serve = app->add_subcommand("serve", "HTTP gateway with a live event stream for the trainer UI");
  add_session_flags(serve, inv.flags, false);

  auto* rp = app->add_subcommand("replay", "recompute reports and verdicts of a log; exit 1 on mismatches");
  rp->add_option("log", inv.replay_log, "session log")->required();

  auto* ev = app->add_subcommand("eval", "validator accuracy per task and condition");
  ev->add_option("logs", inv.eval_logs, "session logs")->required();
  ev->add_flag("--metrics", inv.eval_metrics, "also print training metrics per log");
  ev->add_flag("--no-reference", inv.eval_no_reference, "omit the published reference row");

  auto* sim = app->add_subcommand("device-sim", "TCP stimulator simulator that acks valid frames");
  sim->add_option("--host", inv.sim_host, "bind address")->capture_default_str();
  sim->add_option("--port", inv.sim_port, "listen port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));

  for (CLI::App* sub : {kb, build, query, cal, run, serve, rp, ev, sim}) {
    sub->fallthrough();
    sub->footer("Global: --json (machine-readable output), --config FILE. Environment: see aerocue --help.");
  }
  return app;
}

int run_cli(int argc, const char* const* argv, Streams io, const std::map<std::string, std::string>& env) {
  Invocation inv;
  auto app = make_app(inv);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e, io.out, io.err);
    return code == 0 ? 0 : 2;
  }
  try {
    auto chosen = [&](const char* name) { return app->got_subcommand(name); };
    if (chosen("kb")) {
      const Settings s = settings_for(inv, env);
      auto* kb = app->get_subcommand("kb");
      return kb->got_subcommand("build") ? cmd_kb_build(inv, s, io) : cmd_kb_query(inv, s, io);
    }
    if (chosen("calibrate")) return cmd_calibrate(inv, io);
    if (chosen("run")) return cmd_run(inv, settings_for(inv, env), io);
    if (chosen("serve")) return cmd_serve(inv, settings_for(inv, env), io);
    if (chosen("replay")) return cmd_replay(inv, io);
    if (chosen("eval")) return cmd_eval(inv, io);
    if (chosen("device-sim")) return cmd_device_sim(inv, io);
  } catch (const Error& e) {
    io.err << "error: " << to_string(e.code()) << ": " << e.detail() << "\n";
    return 1;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace aerocue::cli
