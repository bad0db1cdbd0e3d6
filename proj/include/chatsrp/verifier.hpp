#pragma once
// Trace verification. Two property families:
//
//   Secrecy        no term matching the pattern is derivable from the
//                  attacker's final knowledge (knowledge only grows, so the
//                  final state covers every prefix).
//
//   Correspondence if an event matching the antecedent occurs, then events
//                  matching every consequent conjunct occurred strictly
//                  earlier, under the variable binding fixed by the
//                  antecedent instance. Conjuncts marked injective must use
//                  a distinct earlier occurrence per antecedent instance
//                  (maximum bipartite matching); plain conjuncts only need
//                  existence.
//
// Violations are stable under trace extension: consequents must precede
// their antecedent, so growing the trace never repairs a failure.

#include <optional>
#include <string>
#include <vector>

#include "chatsrp/adversary.hpp"
#include "chatsrp/protocol.hpp"
#include "chatsrp/term.hpp"

namespace chatsrp {

struct SecrecyProperty {
  TermPattern pattern;
};

struct EventArg {
  enum class Kind : uint8_t { Any, Var, Const };
  Kind kind = Kind::Any;
  std::string var;         // Var
  TermId value = kNoTerm;  // Const

  static EventArg any() { return {}; }
  static EventArg v(std::string name) { return {Kind::Var, std::move(name), kNoTerm}; }
  static EventArg c(TermId t) { return {Kind::Const, {}, t}; }
};

struct EventPattern {
  EventKind kind = EventKind::UserRequestsRegistration;
  std::vector<EventArg> args;  // one per event argument (host first)
};

struct Conjunct {
  EventPattern pattern;
  bool injective = false;
};

struct CorrespondenceProperty {
  EventPattern antecedent;
  std::vector<Conjunct> consequents;
};

struct Property {
  enum class Type : uint8_t { Secrecy, Correspondence };
  Type type = Type::Secrecy;
  std::string name;
  std::string description;
  SecrecyProperty secrecy;
  CorrespondenceProperty corr;
};

struct Verdict {
  std::string property;
  bool holds = true;
  std::string detail;              // human-readable account of the failure
  std::optional<Event> witness;    // violating antecedent occurrence
  std::string witness_term;        // leaked term (secrecy), s-expression
};

Verdict check_secrecy(const TermArena& arena, const Knowledge& k, const Property& p);
Verdict check_correspondence(const TermArena& arena, const std::vector<Event>& events,
                             const Property& p);
Verdict check_property(const TermArena& arena, const Knowledge& k,
                       const std::vector<Event>& events, const Property& p);

// First violated property in declaration order, if any. The cheap monotone
// screen for the explorer: call it only when events or knowledge changed.
std::optional<Verdict> first_violation(const TermArena& arena, const Knowledge& k,
                                       const std::vector<Event>& events,
                                       const std::vector<Property>& props);

// The verification suite for a variant. The diagnostic query (every sent SMS
// was requested) is deliberately expected to fail under an active attacker;
// it is only included on demand.
std::vector<Property> builtin_properties(TermArena& arena, Variant v, bool diagnostic);

// JSON property files: {"properties": [...]}. Event argument syntax: "_"
// matches anything, "(...)" is a constant term, anything else is a variable.
std::vector<Property> properties_from_json(const std::string& text, TermArena& arena);
std::vector<Property> load_properties(const std::string& path, TermArena& arena);

}  // namespace chatsrp
