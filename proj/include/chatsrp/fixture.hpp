#pragma once
// Scenario fixtures (principals, variant, attacker mode, PRNG seeding) and
// schedule files (explicit action lists). JSON loaders throw ConfigError
// with a message naming the offending field.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chatsrp/adversary.hpp"
#include "chatsrp/protocol.hpp"

namespace chatsrp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AttackerMode : uint8_t { Off, Passive, Active };
const char* to_string(AttackerMode m);
std::optional<AttackerMode> parse_attacker_mode(std::string_view s);

struct FixtureUser {
  std::string label;
  std::string phone;
  bool in_directory = true;
};

struct Fixture {
  Variant variant = Variant::ChatSrp;
  uint64_t seed = 0x0123456789ABCDEFull;
  uint64_t param_a = 0;  // 0 = default (fix64(499,1000))
  AttackerMode attacker = AttackerMode::Passive;
  std::vector<FixtureUser> users;
  int max_user_starts = 2;
  int max_bypass = 2;
  std::vector<std::string> extra_knowledge;  // s-expression terms

  uint64_t effective_param_a() const;
};

Fixture default_fixture(Variant v);
Fixture load_fixture(const std::string& path);
std::string fixture_to_json(const Fixture& f);
Fixture fixture_from_json(const std::string& text);

// A schedule may carry the bounds and attacker mode it was produced under so
// replaying it needs nothing beyond the fixture it came from.
struct Schedule {
  std::optional<int> max_user_starts;
  std::optional<int> max_bypass;
  std::optional<AttackerMode> attacker;
  std::vector<Action> actions;
};

Schedule load_schedule(const std::string& path, TermArena& arena);
std::string schedule_to_json(const TermArena& arena, const Schedule& s);
Schedule schedule_from_json(const std::string& text, TermArena& arena);

std::string action_to_json(const TermArena& arena, const Action& a);
Action action_from_json(const std::string& text, TermArena& arena);

std::string read_file(const std::string& path);         // throws ConfigError
void write_file(const std::string& path, const std::string& text);

}  // namespace chatsrp
