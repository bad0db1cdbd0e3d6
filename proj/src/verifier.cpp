#include "chatsrp/verifier.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "json.hpp"
#include "chatsrp/fixture.hpp"

namespace chatsrp {

namespace {

using Binding = std::map<std::string, TermId>;

// Match one event against a pattern under a binding; free variables extend
// the local copy (consistency within the instance), bound ones must agree.
bool match_event(const Event& e, const EventPattern& p, Binding binding) {
  if (e.kind != p.kind) return false;
  for (size_t i = 0; i < p.args.size(); ++i) {
    TermId got = e.arg(static_cast<int>(i));
    const EventArg& a = p.args[i];
    switch (a.kind) {
      case EventArg::Kind::Any:
        break;
      case EventArg::Kind::Const:
        if (got != a.value) return false;
        break;
      case EventArg::Kind::Var: {
        auto it = binding.find(a.var);
        if (it == binding.end())
          binding.emplace(a.var, got);
        else if (it->second != got)
          return false;
        break;
      }
    }
  }
  return true;
}

Binding bind_antecedent(const Event& e, const EventPattern& p) {
  Binding b;
  for (size_t i = 0; i < p.args.size(); ++i)
    if (p.args[i].kind == EventArg::Kind::Var) b.emplace(p.args[i].var, e.arg(static_cast<int>(i)));
  return b;
}

std::string event_str(const TermArena& arena, const Event& e) {
  std::ostringstream ss;
  ss << to_string(e.kind) << "(" << arena.sexpr(e.host);
  if (event_arity(e.kind) > 1) ss << ", " << arena.sexpr(e.a);
  if (event_arity(e.kind) > 2) ss << ", " << arena.sexpr(e.b);
  ss << ")";
  return ss.str();
}

// Augmenting-path step of the antecedent -> consequent-occurrence matching.
bool augment(size_t ant, const std::vector<std::vector<size_t>>& edges,
             std::vector<int>& owner, std::vector<char>& visited,
             std::vector<int>& match_of) {
  for (size_t c : edges[ant]) {
    if (visited[c]) continue;
    visited[c] = 1;
    if (owner[c] < 0 || augment(static_cast<size_t>(owner[c]), edges, owner, visited, match_of)) {
      owner[c] = static_cast<int>(ant);
      match_of[ant] = static_cast<int>(c);
      return true;
    }
  }
  return false;
}

}  // namespace

Verdict check_secrecy(const TermArena& arena, const Knowledge& k, const Property& p) {
  Verdict v;
  v.property = p.name;
  if (!k.pattern_derivable(arena, p.secrecy.pattern)) return v;
  v.holds = false;
  for (TermId t : k.analyzed())
    if (p.secrecy.pattern.matches(arena, t)) {
      v.witness_term = arena.sexpr(t);
      break;
    }
  if (v.witness_term.empty()) v.witness_term = p.secrecy.pattern.to_string();
  v.detail = "attacker derives " + v.witness_term;
  return v;
}

Verdict check_correspondence(const TermArena& arena, const std::vector<Event>& events,
                             const Property& p) {
  Verdict v;
  v.property = p.name;
  const CorrespondenceProperty& c = p.corr;

  std::vector<size_t> antecedents;
  for (size_t i = 0; i < events.size(); ++i)
    if (match_event(events[i], c.antecedent, {})) antecedents.push_back(i);
  if (antecedents.empty()) return v;

  for (const Conjunct& conj : c.consequents) {
    // Occurrence indices eligible for this conjunct, and the edge relation
    // "antecedent a may use occurrence o" (earlier + binding-compatible).
    std::vector<size_t> occ;
    for (size_t i = 0; i < events.size(); ++i)
      if (events[i].kind == conj.pattern.kind) occ.push_back(i);

    std::vector<std::vector<size_t>> edges(antecedents.size());
    for (size_t a = 0; a < antecedents.size(); ++a) {
      Binding b = bind_antecedent(events[antecedents[a]], c.antecedent);
      for (size_t o = 0; o < occ.size(); ++o) {
        if (occ[o] >= antecedents[a]) break;  // must precede the antecedent
        if (match_event(events[occ[o]], conj.pattern, b)) edges[a].push_back(o);
      }
    }

    if (!conj.injective) {
      for (size_t a = 0; a < antecedents.size(); ++a)
        if (edges[a].empty()) {
          v.holds = false;
          v.witness = events[antecedents[a]];
          v.detail = event_str(arena, events[antecedents[a]]) + " has no earlier " +
                     to_string(conj.pattern.kind);
          return v;
        }
      continue;
    }

    // Injective: grow the matching one antecedent at a time (trace order) so
    // the witness is the earliest antecedent that cannot get its own
    // consequent occurrence.
    std::vector<int> owner(occ.size(), -1);
    std::vector<int> match_of(antecedents.size(), -1);
    for (size_t a = 0; a < antecedents.size(); ++a) {
      std::vector<char> visited(occ.size(), 0);
      if (!augment(a, edges, owner, visited, match_of)) {
        v.holds = false;
        v.witness = events[antecedents[a]];
        v.detail = event_str(arena, events[antecedents[a]]) + " has no unclaimed earlier " +
                   to_string(conj.pattern.kind);
        return v;
      }
    }
  }
  return v;
}

Verdict check_property(const TermArena& arena, const Knowledge& k,
                       const std::vector<Event>& events, const Property& p) {
  return p.type == Property::Type::Secrecy ? check_secrecy(arena, k, p)
                                           : check_correspondence(arena, events, p);
}

std::optional<Verdict> first_violation(const TermArena& arena, const Knowledge& k,
                                       const std::vector<Event>& events,
                                       const std::vector<Property>& props) {
  for (const Property& p : props) {
    Verdict v = check_property(arena, k, events, p);
    if (!v.holds) return v;
  }
  return std::nullopt;
}

std::vector<Property> builtin_properties(TermArena& arena, Variant v, bool diagnostic) {
  (void)arena;
  std::vector<Property> out;

  auto corr = [](std::string name, std::string desc, EventPattern ant,
                 std::vector<Conjunct> cons) {
    Property p;
    p.type = Property::Type::Correspondence;
    p.name = std::move(name);
    p.description = std::move(desc);
    p.corr.antecedent = std::move(ant);
    p.corr.consequents = std::move(cons);
    return p;
  };
  auto ev = [](EventKind k, std::vector<EventArg> args) {
    return EventPattern{k, std::move(args)};
  };
  using A = EventArg;

  if (v == Variant::Ebia) {
    out.push_back(corr(
        "id-issued-only-on-registration",
        "every issued identity traces back to a completed registration request",
        ev(EventKind::CASendsId, {A::v("h"), A::any()}),
        {{ev(EventKind::UserReceivesRegistrationData, {A::v("h"), A::any(), A::any()}), false}}));
    return out;
  }

  {
    Property p;
    p.type = Property::Type::Secrecy;
    p.name = "identity-secrecy";
    p.description = "no issued identity is derivable by the attacker";
    p.secrecy.pattern = TermPattern::parse("(name id _)");
    out.push_back(p);
  }
  {
    Property p;
    p.type = Property::Type::Secrecy;
    p.name = "wrapped-identity-secrecy";
    p.description = "no identity wrapper is derivable by the attacker";
    p.secrecy.pattern = TermPattern::parse("(ienc (name id _) _)");
    out.push_back(p);
  }

  out.push_back(corr("issuance-needs-request",
                     "identities are only issued for hosts that asked to register",
                     ev(EventKind::CASendsId, {A::v("h"), A::v("id")}),
                     {{ev(EventKind::UserRequestsRegistration, {A::v("h")}), false}}));

  out.push_back(corr("received-id-was-issued",
                     "every identity a user accepts was issued once, to that user",
                     ev(EventKind::UserReceivesId, {A::v("h"), A::v("id")}),
                     {{ev(EventKind::CASendsId, {A::v("h"), A::v("id")}), true}}));

  if (v == Variant::ChatSrp)
    out.push_back(corr("sms-round-authenticates",
                       "each accepted SMS code was sent once, for a live request",
                       ev(EventKind::UserProcessesSMS, {A::v("h"), A::v("c")}),
                       {{ev(EventKind::WSSendsSMS, {A::v("h"), A::v("c")}), true},
                        {ev(EventKind::UserRequestsRegistration, {A::v("h")}), true}}));

  out.push_back(corr("registration-data-is-authentic",
                     "accepted ticket+link pairs were produced once, by WS and RA",
                     ev(EventKind::UserReceivesRegistrationData, {A::v("h"), A::v("t"), A::v("l")}),
                     {{ev(EventKind::WSSendsLink, {A::v("h"), A::v("l")}), true},
                      {ev(EventKind::RASendsTicket, {A::v("h"), A::v("t")}), true}}));

  if (diagnostic)
    out.push_back(corr("sms-sent-only-on-request",
                       "diagnostic: WS sends codes only to hosts that requested registration",
                       ev(EventKind::WSSendsSMS, {A::v("h"), A::v("c")}),
                       {{ev(EventKind::UserRequestsRegistration, {A::v("h")}), true}}));

  return out;
}

namespace {

using json = nlohmann::ordered_json;

EventArg arg_from_string(const std::string& s, TermArena& arena) {
  if (s == "_") return EventArg::any();
  if (!s.empty() && s.front() == '(') return EventArg::c(arena.parse(s));
  return EventArg::v(s);
}

EventPattern pattern_from_json(const json& o, TermArena& arena) {
  EventPattern p;
  std::string kind = o.at("event").get<std::string>();
  auto k = parse_event_kind(kind);
  if (!k) throw ConfigError("property: unknown event '" + kind + "'");
  p.kind = *k;
  for (const json& a : o.at("args")) p.args.push_back(arg_from_string(a.get<std::string>(), arena));
  if (static_cast<int>(p.args.size()) != event_arity(p.kind))
    throw ConfigError("property: " + kind + " takes " + std::to_string(event_arity(p.kind)) +
                      " argument(s)");
  return p;
}

}  // namespace

std::vector<Property> properties_from_json(const std::string& text, TermArena& arena) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("properties: ") + e.what());
  }
  if (!o.is_object() || !o.contains("properties"))
    throw ConfigError("properties: expected an object with a \"properties\" array");
  std::vector<Property> out;
  for (const json& po : o.at("properties")) {
    Property p;
    std::string type = po.at("type").get<std::string>();
    p.name = po.at("name").get<std::string>();
    if (po.contains("description")) p.description = po.at("description").get<std::string>();
    if (type == "secrecy") {
      p.type = Property::Type::Secrecy;
      p.secrecy.pattern = TermPattern::parse(po.at("pattern").get<std::string>());
    } else if (type == "correspondence") {
      p.type = Property::Type::Correspondence;
      p.corr.antecedent = pattern_from_json(po.at("antecedent"), arena);
      for (const json& co : po.at("consequents")) {
        Conjunct c;
        c.pattern = pattern_from_json(co, arena);
        if (co.contains("injective")) c.injective = co.at("injective").get<bool>();
        p.corr.consequents.push_back(std::move(c));
      }
      if (p.corr.consequents.empty())
        throw ConfigError("property '" + p.name + "': needs at least one consequent");
    } else {
      throw ConfigError("property '" + p.name + "': unknown type '" + type + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Property> load_properties(const std::string& path, TermArena& arena) {
  return properties_from_json(read_file(path), arena);
}

}  // namespace chatsrp
