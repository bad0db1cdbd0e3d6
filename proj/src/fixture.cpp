#include "chatsrp/fixture.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace chatsrp {

using json = nlohmann::ordered_json;

const char* to_string(AttackerMode m) {
  switch (m) {
    case AttackerMode::Off: return "off";
    case AttackerMode::Passive: return "passive";
    case AttackerMode::Active: return "active";
  }
  return "?";
}

std::optional<AttackerMode> parse_attacker_mode(std::string_view s) {
  if (s == "off") return AttackerMode::Off;
  if (s == "passive") return AttackerMode::Passive;
  if (s == "active" || s == "on") return AttackerMode::Active;
  return std::nullopt;
}

uint64_t Fixture::effective_param_a() const { return param_a ? param_a : fix64(499, 1000); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

namespace {

// Seeds and map parameters travel as hex strings so fixtures stay readable
// and exact; plain integers are accepted too.
uint64_t parse_u64(const json& v, const char* field) {
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    size_t pos = 0;
    try {
      uint64_t out = std::stoull(s, &pos, 0);
      if (pos == s.size()) return out;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(std::string(field) + ": expected an unsigned integer or hex string");
}

std::string hex_u64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const json* opt_field(const json& j, const char* name) {
  auto it = j.find(name);
  return it == j.end() ? nullptr : &*it;
}

const char* channel_kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::Public: return "public";
    case ChannelKind::Ssl: return "ssl";
    case ChannelKind::Sms: return "sms";
    case ChannelKind::Smtp: return "smtp";
  }
  return "?";
}

ChannelKind parse_channel_kind(const std::string& s) {
  if (s == "public") return ChannelKind::Public;
  if (s == "ssl") return ChannelKind::Ssl;
  if (s == "sms") return ChannelKind::Sms;
  if (s == "smtp") return ChannelKind::Smtp;
  throw ConfigError("channel.kind: unknown kind '" + s + "'");
}

json action_to_obj(const TermArena& arena, const Action& a) {
  json o;
  switch (a.kind) {
    case Action::Kind::StartUser:
      o["do"] = "start-user";
      o["user"] = a.user;
      break;
    case Action::Kind::Deliver:
      o["do"] = "deliver";
      o["msg"] = a.msg_index;
      break;
    case Action::Kind::Block:
      o["do"] = "block";
      o["msg"] = a.msg_index;
      break;
    case Action::Kind::Observe:
      o["do"] = "observe";
      o["msg"] = a.msg_index;
      break;
    case Action::Kind::Inject: {
      o["do"] = "inject";
      json ch;
      ch["kind"] = channel_kind_name(a.forged.channel.kind);
      if (a.forged.channel.kind == ChannelKind::Ssl) ch["session"] = a.forged.channel.session;
      o["channel"] = ch;
      o["payload"] = arena.sexpr(a.forged.payload);
      o["dst"] = arena[a.forged.dst].label;
      break;
    }
    case Action::Kind::SslBypass:
      o["do"] = "ssl-bypass";
      o["as"] = arena[a.claimed_host].label;
      break;
  }
  return o;
}

Action action_from_obj(const json& o, TermArena& arena) {
  if (!o.is_object() || !o.contains("do"))
    throw ConfigError("action: expected an object with a \"do\" field");
  std::string verb = o.at("do").get<std::string>();
  Action a;
  if (verb == "start-user") {
    a.kind = Action::Kind::StartUser;
    a.user = o.at("user").get<std::string>();
  } else if (verb == "deliver" || verb == "block" || verb == "observe") {
    a.kind = verb == "deliver" ? Action::Kind::Deliver
             : verb == "block" ? Action::Kind::Block
                               : Action::Kind::Observe;
    a.msg_index = parse_u64(o.at("msg"), "msg");
  } else if (verb == "inject") {
    a.kind = Action::Kind::Inject;
    const json& ch = o.at("channel");
    a.forged.channel.kind = parse_channel_kind(ch.at("kind").get<std::string>());
    if (const json* s = opt_field(ch, "session"))
      a.forged.channel.session = static_cast<uint32_t>(parse_u64(*s, "channel.session"));
    a.forged.payload = arena.parse(o.at("payload").get<std::string>());
    a.forged.dst = arena.host(o.at("dst").get<std::string>());
  } else if (verb == "ssl-bypass") {
    a.kind = Action::Kind::SslBypass;
    a.claimed_host = arena.host(o.at("as").get<std::string>());
  } else {
    throw ConfigError("action: unknown verb '" + verb + "'");
  }
  return a;
}

}  // namespace

Fixture default_fixture(Variant v) {
  Fixture f;
  f.variant = v;
  f.users = {{"alice", "+1-555-0100", true}, {"bob", "+1-555-0101", true}};
  return f;
}

std::string fixture_to_json(const Fixture& f) {
  json o;
  o["schema"] = "chatsrp-fixture-v1";
  o["variant"] = to_string(f.variant);
  o["seed"] = hex_u64(f.seed);
  o["param_a"] = f.param_a ? json(hex_u64(f.param_a)) : json(0);
  o["attacker"] = to_string(f.attacker);
  o["users"] = json::array();
  for (const FixtureUser& u : f.users) {
    json uo;
    uo["label"] = u.label;
    uo["phone"] = u.phone;
    uo["in_directory"] = u.in_directory;
    o["users"].push_back(uo);
  }
  o["max_user_starts"] = f.max_user_starts;
  o["max_bypass"] = f.max_bypass;
  if (!f.extra_knowledge.empty()) o["extra_knowledge"] = f.extra_knowledge;
  return o.dump(2) + "\n";
}

Fixture fixture_from_json(const std::string& text) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fixture: ") + e.what());
  }
  if (!o.is_object()) throw ConfigError("fixture: expected a JSON object");
  Fixture f;
  if (const json* v = opt_field(o, "variant")) {
    auto parsed = parse_variant(v->get<std::string>());
    if (!parsed) throw ConfigError("variant: unknown variant '" + v->get<std::string>() + "'");
    f.variant = *parsed;
  }
  if (const json* v = opt_field(o, "seed")) f.seed = parse_u64(*v, "seed");
  if (const json* v = opt_field(o, "param_a")) f.param_a = parse_u64(*v, "param_a");
  if (const json* v = opt_field(o, "attacker")) {
    auto parsed = parse_attacker_mode(v->get<std::string>());
    if (!parsed) throw ConfigError("attacker: expected off, passive or active");
    f.attacker = *parsed;
  }
  if (const json* v = opt_field(o, "users")) {
    if (!v->is_array()) throw ConfigError("users: expected an array");
    for (const json& uo : *v) {
      FixtureUser u;
      u.label = uo.at("label").get<std::string>();
      if (const json* p = opt_field(uo, "phone")) u.phone = p->get<std::string>();
      if (const json* d = opt_field(uo, "in_directory")) u.in_directory = d->get<bool>();
      f.users.push_back(std::move(u));
    }
  } else {
    f.users = default_fixture(f.variant).users;
  }
  if (const json* v = opt_field(o, "max_user_starts")) f.max_user_starts = v->get<int>();
  if (const json* v = opt_field(o, "max_bypass")) f.max_bypass = v->get<int>();
  if (const json* v = opt_field(o, "extra_knowledge"))
    f.extra_knowledge = v->get<std::vector<std::string>>();
  return f;
}

Fixture load_fixture(const std::string& path) { return fixture_from_json(read_file(path)); }

std::string schedule_to_json(const TermArena& arena, const Schedule& s) {
  json o;
  o["schema"] = "chatsrp-schedule-v1";
  if (s.max_user_starts) o["max_user_starts"] = *s.max_user_starts;
  if (s.max_bypass) o["max_bypass"] = *s.max_bypass;
  if (s.attacker) o["attacker"] = to_string(*s.attacker);
  o["actions"] = json::array();
  for (const Action& a : s.actions) o["actions"].push_back(action_to_obj(arena, a));
  return o.dump(2) + "\n";
}

Schedule schedule_from_json(const std::string& text, TermArena& arena) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  if (!o.is_object() || !o.contains("actions"))
    throw ConfigError("schedule: expected an object with an \"actions\" array");
  Schedule s;
  if (const json* v = opt_field(o, "max_user_starts")) s.max_user_starts = v->get<int>();
  if (const json* v = opt_field(o, "max_bypass")) s.max_bypass = v->get<int>();
  if (const json* v = opt_field(o, "attacker")) {
    auto parsed = parse_attacker_mode(v->get<std::string>());
    if (!parsed) throw ConfigError("schedule attacker: expected off, passive or active");
    s.attacker = *parsed;
  }
  for (const json& ao : o.at("actions")) s.actions.push_back(action_from_obj(ao, arena));
  return s;
}

Schedule load_schedule(const std::string& path, TermArena& arena) {
  return schedule_from_json(read_file(path), arena);
}

std::string action_to_json(const TermArena& arena, const Action& a) {
  return action_to_obj(arena, a).dump();
}

Action action_from_json(const std::string& text, TermArena& arena) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("action: ") + e.what());
  }
  return action_from_obj(o, arena);
}

}  // namespace chatsrp
