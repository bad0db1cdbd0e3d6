#include "chatsrp/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "json.hpp"
#include "chatsrp/fixture.hpp"

namespace chatsrp {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string hex_u64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string host_label(const TermArena& arena, TermId h) {
  return h == kNoTerm ? std::string() : arena[h].label;
}

json event_obj(const TermArena& arena, const Event& e) {
  json o;
  o["seq"] = e.seq;
  o["event"] = to_string(e.kind);
  json args = json::array();
  for (int i = 0; i < event_arity(e.kind); ++i) args.push_back(arena.sexpr(e.arg(i)));
  o["args"] = args;
  return o;
}

json msg_obj(const TermArena& arena, const ChannelMsg& m) {
  json o;
  json ch;
  ch["kind"] = m.channel.kind == ChannelKind::Public ? "public"
               : m.channel.kind == ChannelKind::Ssl  ? "ssl"
               : m.channel.kind == ChannelKind::Sms  ? "sms"
                                                     : "smtp";
  if (m.channel.kind == ChannelKind::Ssl) ch["session"] = m.channel.session;
  o["channel"] = ch;
  o["payload"] = arena.sexpr(m.payload);
  o["src"] = host_label(arena, m.src);
  o["dst"] = host_label(arena, m.dst);
  o["send_index"] = m.send_index;
  return o;
}

json verdict_obj(const TermArena& arena, const Verdict& v) {
  json o;
  o["property"] = v.property;
  o["verdict"] = v.holds ? "holds-within-bound" : "violated";
  if (!v.holds) {
    o["detail"] = v.detail;
    if (v.witness) o["witness_event"] = event_obj(arena, *v.witness);
    if (!v.witness_term.empty()) o["witness_term"] = v.witness_term;
  }
  return o;
}

}  // namespace

uint64_t parse_hex_u64(const std::string& s) {
  std::string t = s;
  if (t.rfind("0x", 0) == 0 || t.rfind("0X", 0) == 0) t = t.substr(2);
  if (t.empty()) throw ConfigError("expected a hex integer, got '" + s + "'");
  size_t pos = 0;
  uint64_t out = 0;
  try {
    out = std::stoull(t, &pos, 16);
  } catch (const std::exception&) {
    throw ConfigError("expected a hex integer, got '" + s + "'");
  }
  if (pos != t.size()) throw ConfigError("trailing junk in hex integer '" + s + "'");
  return out;
}

std::string locate_input(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv("CHATSRP_FIXTURE_DIR")) {
    fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt.string();
  }
  return path;  // let the open fail with the original name
}

Fixture resolve_fixture(const CommonArgs& args) {
  Fixture fx;
  if (!args.fixture_path.empty()) {
    fx = load_fixture(locate_input(args.fixture_path));
  } else {
    Variant v = Variant::ChatSrp;
    if (!args.variant.empty()) {
      auto parsed = parse_variant(args.variant);
      if (!parsed) throw ConfigError("unknown variant '" + args.variant + "'");
      v = *parsed;
    }
    fx = default_fixture(v);
  }
  if (!args.variant.empty()) {
    auto parsed = parse_variant(args.variant);
    if (!parsed) throw ConfigError("unknown variant '" + args.variant + "'");
    fx.variant = *parsed;
  }
  if (!args.seed_hex.empty()) fx.seed = parse_hex_u64(args.seed_hex);
  if (!args.attacker.empty()) {
    auto parsed = parse_attacker_mode(args.attacker);
    if (!parsed) throw ConfigError("unknown attacker mode '" + args.attacker + "'");
    fx.attacker = *parsed;
  }
  if (args.sessions >= 0) fx.max_user_starts = args.sessions;
  return fx;
}

std::string trace_to_json(const TermArena& arena, const Fixture& fx, const Trace& trace,
                          const std::vector<Verdict>& verdicts) {
  json o;
  o["schema"] = "chatsrp-trace-v1";
  o["variant"] = to_string(fx.variant);
  o["attacker"] = to_string(fx.attacker);
  o["seed"] = hex_u64(fx.seed);
  json steps = json::array();
  for (const TraceStep& s : trace.steps) {
    json so;
    so["index"] = s.index;
    so["actor"] = s.actor;
    so["action"] = json::parse(action_to_json(arena, s.action));
    if (s.msg) so["msg"] = msg_obj(arena, *s.msg);
    if (!s.events.empty()) {
      json evs = json::array();
      for (const Event& e : s.events) evs.push_back(event_obj(arena, e));
      so["events"] = evs;
    }
    if (!s.notes.empty()) so["notes"] = s.notes;
    if (!s.knowledge.empty()) so["knowledge"] = s.knowledge;
    steps.push_back(so);
  }
  o["steps"] = steps;
  json evs = json::array();
  for (const Event& e : trace.events) evs.push_back(event_obj(arena, e));
  o["events"] = evs;
  json vs = json::array();
  for (const Verdict& v : verdicts) vs.push_back(verdict_obj(arena, v));
  o["verdicts"] = vs;
  return o.dump(2) + "\n";
}

namespace {

std::vector<Property> gather_properties(const CommonArgs& args, TermArena& arena, Variant v) {
  std::vector<Property> props = builtin_properties(arena, v, args.diagnostic);
  if (!args.properties_path.empty()) {
    std::vector<Property> extra = load_properties(locate_input(args.properties_path), arena);
    props.insert(props.end(), extra.begin(), extra.end());
  }
  return props;
}

std::string derived_trace_path(const CommonArgs& args) {
  if (!args.trace_out.empty()) return args.trace_out;
  if (args.json_out.empty()) return {};
  fs::path p = args.json_out;
  p.replace_extension();          // report.json -> report
  p += ".trace.json";             // -> report.trace.json
  return p.string();
}

void print_verdicts(const std::vector<Verdict>& verdicts) {
  for (const Verdict& v : verdicts) {
    if (v.holds) {
      std::cout << "property " << v.property << ": holds-within-bound\n";
    } else {
      std::cout << "property " << v.property << ": VIOLATED\n";
      std::cout << "  " << v.detail << "\n";
    }
  }
}

json bounds_obj(const Fixture& fx, std::optional<int> max_steps) {
  json b;
  if (max_steps) b["max_steps"] = *max_steps;
  b["max_user_starts"] = fx.max_user_starts;
  b["max_bypass"] = fx.max_bypass;
  return b;
}

}  // namespace

int cmd_run(const RunArgs& args) {
  try {
    Fixture fx = resolve_fixture(args);
    TermArena arena;

    std::optional<Schedule> sched;
    if (!args.schedule_path.empty()) {
      sched = load_schedule(locate_input(args.schedule_path), arena);
      if (sched->max_user_starts) fx.max_user_starts = *sched->max_user_starts;
      if (sched->max_bypass) fx.max_bypass = *sched->max_bypass;
      if (sched->attacker) fx.attacker = *sched->attacker;
    }

    auto t0 = std::chrono::steady_clock::now();
    System sys(fx, arena);
    sys.set_recording(true);
    Trace trace = sched ? run_scenario(sys, sched->actions) : run_honest(sys);

    std::vector<Property> props = gather_properties(args, arena, fx.variant);
    std::vector<Verdict> verdicts;
    bool violated = false;
    for (const Property& p : props) {
      verdicts.push_back(check_property(arena, sys.knowledge(), sys.events(), p));
      violated = violated || !verdicts.back().holds;
    }
    auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              t0);

    std::cout << "variant " << to_string(fx.variant) << ", attacker " << to_string(fx.attacker)
              << ", seed " << hex_u64(fx.seed) << ", " << trace.steps.size() << " steps, "
              << trace.events.size() << " events\n";
    print_verdicts(verdicts);
    if (!violated) std::cout << "all properties hold on this trace\n";

    std::string trace_path = derived_trace_path(args);
    if (!trace_path.empty()) write_file(trace_path, trace_to_json(arena, fx, trace, verdicts));

    if (!args.json_out.empty()) {
      json rep;
      rep["schema"] = "chatsrp-report-v1";
      rep["command"] = "run";
      rep["variant"] = to_string(fx.variant);
      rep["attacker"] = to_string(fx.attacker);
      rep["seed"] = hex_u64(fx.seed);
      rep["bounds"] = bounds_obj(fx, std::nullopt);
      rep["schedule"] = args.schedule_path.empty() ? json(nullptr) : json(args.schedule_path);
      rep["steps"] = trace.steps.size();
      rep["events"] = trace.events.size();
      json vs = json::array();
      for (const Verdict& v : verdicts) vs.push_back(verdict_obj(arena, v));
      rep["properties"] = vs;
      rep["violated"] = violated;
      if (!trace_path.empty()) rep["trace"] = trace_path;
      rep["wall_ms"] = wall.count();
      write_file(args.json_out, rep.dump(2) + "\n");
    }
    return violated ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_explore(const ExploreArgs& args) {
  try {
    Fixture fx = resolve_fixture(args);
    fx.attacker = AttackerMode::Active;
    TermArena arena;
    std::vector<Property> props = gather_properties(args, arena, fx.variant);

    ExploreConfig cfg;
    cfg.max_steps = args.max_steps;
    cfg.max_states = args.max_states;
    cfg.workers = args.workers;
    cfg.progress = args.progress;

    uint64_t walks = 0;
    if (args.search.rfind("random:", 0) == 0) {
      walks = std::stoull(args.search.substr(7));
    } else if (args.search != "dfs") {
      throw ConfigError("unknown search mode '" + args.search + "' (dfs or random:N)");
    }

    auto t0 = std::chrono::steady_clock::now();
    ExploreResult res = walks ? explore_random(fx, arena, props, cfg, walks, fx.seed)
                              : explore(fx, arena, props, cfg);
    auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              t0);

    std::vector<Verdict> verdicts;
    if (res.violation_found) {
      // Per-property verdicts on the counterexample trace itself.
      System replay(fx, arena);
      run_scenario(replay, res.attack);
      for (const Property& p : props)
        verdicts.push_back(check_property(arena, replay.knowledge(), replay.events(), p));
    } else {
      for (const Property& p : props) {
        Verdict v;
        v.property = p.name;
        verdicts.push_back(v);
      }
    }

    std::cout << "variant " << to_string(fx.variant) << ", seed " << hex_u64(fx.seed)
              << ", bounds: steps=" << cfg.max_steps << ", sessions=" << fx.max_user_starts
              << ", bypass=" << fx.max_bypass << "\n";
    print_verdicts(verdicts);
    if (res.violation_found) {
      std::cout << "counterexample: " << res.attack.size() << " action(s), property "
                << res.verdict.property << "\n";
    } else if (res.exhausted) {
      std::cout << "no violation within bound (steps=" << cfg.max_steps
                << ", sessions=" << fx.max_user_starts << ")\n";
    } else {
      std::cout << "no violation found (search truncated before covering the bound)\n";
    }
    std::cout << "states visited " << res.stats.visited << ", expanded " << res.stats.expanded
              << ", actions applied " << res.stats.applied << ", " << wall.count() << " ms\n";

    std::string export_path = args.export_out;
    if (res.violation_found && !export_path.empty()) {
      Schedule s;
      s.max_user_starts = fx.max_user_starts;
      s.max_bypass = fx.max_bypass;
      s.attacker = AttackerMode::Active;
      s.actions = res.attack;
      write_file(export_path, schedule_to_json(arena, s));
      std::cout << "counterexample schedule written to " << export_path << "\n";
    }

    std::string trace_path = derived_trace_path(args);
    if (!trace_path.empty() && res.violation_found)
      write_file(trace_path, trace_to_json(arena, fx, res.trace, verdicts));

    if (!args.json_out.empty()) {
      json rep;
      rep["schema"] = "chatsrp-report-v1";
      rep["command"] = "explore";
      rep["variant"] = to_string(fx.variant);
      rep["attacker"] = "active";
      rep["seed"] = hex_u64(fx.seed);
      rep["bounds"] = bounds_obj(fx, args.max_steps);
      rep["search"] = args.search;
      rep["workers"] = args.workers;
      json vs = json::array();
      for (const Verdict& v : verdicts) vs.push_back(verdict_obj(arena, v));
      rep["properties"] = vs;
      rep["violated"] = res.violation_found;
      rep["exhausted"] = res.exhausted;
      if (res.violation_found) {
        json ce;
        ce["property"] = res.verdict.property;
        json acts = json::array();
        for (const Action& a : res.attack) acts.push_back(json::parse(action_to_json(arena, a)));
        ce["actions"] = acts;
        if (!export_path.empty()) ce["schedule"] = export_path;
        rep["counterexample"] = ce;
      }
      json st;
      st["visited"] = res.stats.visited;
      st["expanded"] = res.stats.expanded;
      st["applied"] = res.stats.applied;
      st["pruned_ineffective"] = res.stats.pruned_ineffective;
      st["dedup_hits"] = res.stats.dedup_hits;
      st["max_depth"] = res.stats.max_depth;
      rep["stats"] = st;
      rep["wall_ms"] = wall.count();
      write_file(args.json_out, rep.dump(2) + "\n");
    }
    return res.violation_found ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_prng(const PrngArgs& args) {
  try {
    uint64_t seed = parse_hex_u64(args.seed_hex);
    uint64_t a = args.a_hex.empty() ? fix64(499, 1000) : parse_hex_u64(args.a_hex);
    TentPrng prng(seed, a);
    Bitstring bits = prng.next_bits(args.bits);
    std::string bytes(bits.bytes.begin(), bits.bytes.end());
    write_file(args.out_path, bytes);
    std::cout << "wrote " << args.bits << " bits (" << bytes.size() << " bytes) to "
              << args.out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace chatsrp
