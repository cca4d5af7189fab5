#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cli_config.hpp"

namespace CLI {
class App;
class Option;
}  // namespace CLI

namespace aerocue::cli {

// Session-shaping flags. Only the ones given on the command line override
// the environment and config file.
struct SessionFlags {
  std::optional<std::string> task, scenario, telemetry, backend, assist;
  std::optional<std::string> base_url, model, api_key, embed_url, embed_model;
  std::optional<std::string> device, profile, index, log;
  std::optional<std::uint64_t> seed;
  std::optional<int> deadline_ms, ems_duration_ms, tick_ms, timeout_ms;
  std::optional<std::string> host, ui_dir;
  std::optional<int> port;
  bool interactive = false;
  CLI::Option* interactive_opt = nullptr;
};

Patch flags_to_patch(const SessionFlags& f);

// Values bound by the parser.
struct Invocation {
  bool json = false;
  std::string config_path;
  SessionFlags flags;

  std::string kb_dir, kb_out, kb_embedder = "hash", kb_text, kb_tier;
  std::size_t kb_dimension = 256, kb_max_chunk_chars = 700, kb_k = 5;
  std::vector<std::string> kb_tags;

  std::string cal_subject = "trainee", cal_out;
  std::vector<std::string> cal_channels{"fwd", "back", "left", "right"};
  double cal_step_ma = 0.5;
  std::optional<double> cal_ceiling_ma;

  std::string replay_log;
  std::vector<std::string> eval_logs;
  bool eval_metrics = false, eval_no_reference = false;

  std::string sim_host = "127.0.0.1";
  int sim_port = 7070;
};

std::unique_ptr<CLI::App> make_app(Invocation& inv);

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Exit codes: 0 success, 1 operational error (or replay mismatches), 2 usage.
int run_cli(int argc, const char* const* argv, Streams io, const std::map<std::string, std::string>& env);

}  // namespace aerocue::cli
