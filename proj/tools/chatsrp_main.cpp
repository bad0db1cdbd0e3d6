// Subcommand front-end; all real work lives in the library (chatsrp/cli.hpp).

#include "CLI11.hpp"
#include "chatsrp/cli.hpp"

namespace {

void add_common(CLI::App* cmd, chatsrp::CommonArgs& args) {
  cmd->add_option("--fixture", args.fixture_path,
                  "fixture JSON (default: built-in per-variant fixture)");
  cmd->add_option("--variant", args.variant, "chatsrp | chatsrp-no-sms | ebia");
  cmd->add_option("--seed", args.seed_hex, "PRNG seed, hex");
  cmd->add_option("--attacker", args.attacker, "off | passive | active");
  cmd->add_option("--sessions", args.sessions, "honest user sessions to allow")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--properties", args.properties_path, "extra property JSON file");
  cmd->add_flag("--diagnostic", args.diagnostic, "include the deliberately-failing SMS query");
  cmd->add_option("--json", args.json_out, "write a JSON report here");
  cmd->add_option("--trace", args.trace_out, "write the trace JSON here");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Executable registration-protocol model with an adversarial explorer"};
  app.require_subcommand(1);

  chatsrp::RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run one scenario and verify the trace");
  add_common(run, run_args);
  run->add_option("--schedule", run_args.schedule_path,
                  "explicit action schedule (default: honest scheduling)");

  chatsrp::RunArgs replay_args;
  CLI::App* replay =
      app.add_subcommand("replay", "re-execute a saved schedule (alias of run --schedule)");
  add_common(replay, replay_args);
  replay->add_option("--schedule", replay_args.schedule_path, "action schedule JSON")
      ->required();

  chatsrp::ExploreArgs explore_args;
  CLI::App* explore = app.add_subcommand("explore", "search for property violations");
  add_common(explore, explore_args);
  explore->add_option("--max-steps", explore_args.max_steps, "action-depth bound")
      ->check(CLI::NonNegativeNumber);
  explore->add_option("--max-states", explore_args.max_states,
                      "stop after this many distinct states (0 = unbounded)");
  explore->add_option("--search", explore_args.search, "dfs | random:N");
  explore->add_option("--workers", explore_args.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  explore->add_option("--export", explore_args.export_out,
                      "write a found counterexample schedule here");
  explore->add_flag("--progress", explore_args.progress, "periodic search status on stderr");

  chatsrp::PrngArgs prng_args;
  CLI::App* prng = app.add_subcommand("prng", "dump the raw generator bitstream");
  prng->add_option("--seed", prng_args.seed_hex, "initial state, hex");
  prng->add_option("--a", prng_args.a_hex, "map parameter, hex fixed-point");
  prng->add_option("--bits", prng_args.bits, "number of bits")->required();
  prng->add_option("--out", prng_args.out_path, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return chatsrp::cmd_run(run_args);
  if (replay->parsed()) return chatsrp::cmd_run(replay_args);
  if (explore->parsed()) return chatsrp::cmd_explore(explore_args);
  if (prng->parsed()) return chatsrp::cmd_prng(prng_args);
  return 2;
}
