#pragma once
// Command implementations behind the executable. Each cmd_* returns the
// process exit code: 0 all properties hold within bound, 1 a counterexample
// was found, 2 configuration/usage error.

#include <optional>
#include <string>

#include "chatsrp/explore.hpp"
#include "chatsrp/system.hpp"
#include "chatsrp/verifier.hpp"

namespace chatsrp {

// Options shared by run/explore: fixture resolution plus overrides.
struct CommonArgs {
  std::string fixture_path;  // empty: built-in default for the variant
  std::string variant;       // override, e.g. "chatsrp-no-sms"
  std::string seed_hex;      // override
  std::string attacker;      // override: off|passive|active
  int sessions = -1;         // override max_user_starts; -1 = keep fixture's
  std::string properties_path;  // extra properties, appended to the builtins
  bool diagnostic = false;      // include the deliberately-failing SMS query
  std::string json_out;         // machine-readable report
  std::string trace_out;        // trace JSON (default: derived from json_out)
};

struct RunArgs : CommonArgs {
  std::string schedule_path;  // empty: honest default scheduling
};

struct ExploreArgs : CommonArgs {
  int max_steps = 40;
  uint64_t max_states = 0;
  std::string search = "dfs";  // dfs | random:N
  int workers = 1;
  std::string export_out;  // counterexample schedule file
  bool progress = false;
};

struct PrngArgs {
  std::string seed_hex = "0123456789abcdef";
  std::string a_hex;  // empty: the default map parameter
  uint64_t bits = 0;
  std::string out_path;
};

int cmd_run(const RunArgs& args);
int cmd_explore(const ExploreArgs& args);
int cmd_prng(const PrngArgs& args);

// Plumbing shared with tests.
uint64_t parse_hex_u64(const std::string& s);  // throws ConfigError
Fixture resolve_fixture(const CommonArgs& args);
std::string locate_input(const std::string& path);  // honours CHATSRP_FIXTURE_DIR
std::string trace_to_json(const TermArena& arena, const Fixture& fx, const Trace& trace,
                          const std::vector<Verdict>& verdicts);

}  // namespace chatsrp
