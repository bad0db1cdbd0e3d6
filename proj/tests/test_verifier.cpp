#include <vector>

#include "chatsrp/fixture.hpp"
#include "chatsrp/verifier.hpp"
#include "doctest.h"

using namespace chatsrp;

namespace {

using A = EventArg;
using K = EventKind;

Event ev(K k, TermId host, TermId a = kNoTerm, TermId b = kNoTerm) {
  return Event{k, host, a, b, 0};
}

Property corr(std::string name, EventPattern ant, std::vector<Conjunct> cons) {
  Property p;
  p.type = Property::Type::Correspondence;
  p.name = std::move(name);
  p.corr.antecedent = std::move(ant);
  p.corr.consequents = std::move(cons);
  return p;
}

EventPattern pat(K k, std::vector<A> args) { return EventPattern{k, std::move(args)}; }

}  // namespace

TEST_CASE("plain correspondence needs an earlier matching occurrence") {
  TermArena arena;
  TermId alice = arena.host("alice");
  TermId bob = arena.host("bob");
  TermId id0 = arena.name("id", 0);

  Property p = corr("issued-after-request", pat(K::CASendsId, {A::v("h"), A::any()}),
                    {{pat(K::UserRequestsRegistration, {A::v("h")}), false}});

  SUBCASE("request then issue holds") {
    std::vector<Event> t = {ev(K::UserRequestsRegistration, alice), ev(K::CASendsId, alice, id0)};
    CHECK(check_correspondence(arena, t, p).holds);
  }
  SUBCASE("issue without request is violated, with the witness") {
    std::vector<Event> t = {ev(K::CASendsId, alice, id0)};
    Verdict v = check_correspondence(arena, t, p);
    CHECK(!v.holds);
    REQUIRE(v.witness.has_value());
    CHECK(v.witness->kind == K::CASendsId);
    CHECK(v.witness->host == alice);
  }
  SUBCASE("order matters: issue before request is still a violation") {
    std::vector<Event> t = {ev(K::CASendsId, alice, id0), ev(K::UserRequestsRegistration, alice)};
    CHECK(!check_correspondence(arena, t, p).holds);
  }
  SUBCASE("a different host's request does not count") {
    std::vector<Event> t = {ev(K::UserRequestsRegistration, bob), ev(K::CASendsId, alice, id0)};
    CHECK(!check_correspondence(arena, t, p).holds);
  }
  SUBCASE("one request covers many issuances when not injective") {
    std::vector<Event> t = {ev(K::UserRequestsRegistration, alice),
                            ev(K::CASendsId, alice, id0),
                            ev(K::CASendsId, alice, arena.name("id", 1))};
    CHECK(check_correspondence(arena, t, p).holds);
  }
}

TEST_CASE("injective correspondence consumes one occurrence per instance") {
  TermArena arena;
  TermId alice = arena.host("alice");
  TermId id0 = arena.name("id", 0);

  Property p = corr("received-once", pat(K::UserReceivesId, {A::v("h"), A::v("id")}),
                    {{pat(K::CASendsId, {A::v("h"), A::v("id")}), true}});

  SUBCASE("issue/receive pairs hold") {
    std::vector<Event> t = {ev(K::CASendsId, alice, id0), ev(K::UserReceivesId, alice, id0)};
    CHECK(check_correspondence(arena, t, p).holds);
  }
  SUBCASE("two receives of one issuance fail on the second") {
    std::vector<Event> t = {ev(K::CASendsId, alice, id0), ev(K::UserReceivesId, alice, id0),
                            ev(K::UserReceivesId, alice, id0)};
    Verdict v = check_correspondence(arena, t, p);
    CHECK(!v.holds);
    CHECK(v.detail.find("no unclaimed") != std::string::npos);
  }
  SUBCASE("two issuances cover two receives") {
    std::vector<Event> t = {ev(K::CASendsId, alice, id0), ev(K::CASendsId, alice, id0),
                            ev(K::UserReceivesId, alice, id0), ev(K::UserReceivesId, alice, id0)};
    CHECK(check_correspondence(arena, t, p).holds);
  }
  SUBCASE("an issuance arriving between the receives rescues only later ones") {
    std::vector<Event> t = {ev(K::UserReceivesId, alice, id0), ev(K::CASendsId, alice, id0),
                            ev(K::UserReceivesId, alice, id0)};
    CHECK(!check_correspondence(arena, t, p).holds);
  }
}

TEST_CASE("conjunctions require every consequent") {
  TermArena arena;
  TermId alice = arena.host("alice");
  TermId code = arena.name("otp:123456", 0);

  Property p = corr("sms-authentic", pat(K::UserProcessesSMS, {A::v("h"), A::v("c")}),
                    {{pat(K::WSSendsSMS, {A::v("h"), A::v("c")}), true},
                     {pat(K::UserRequestsRegistration, {A::v("h")}), true}});

  std::vector<Event> both = {ev(K::UserRequestsRegistration, alice),
                             ev(K::WSSendsSMS, alice, code),
                             ev(K::UserProcessesSMS, alice, code)};
  CHECK(check_correspondence(arena, both, p).holds);

  std::vector<Event> missing_request = {ev(K::WSSendsSMS, alice, code),
                                        ev(K::UserProcessesSMS, alice, code)};
  CHECK(!check_correspondence(arena, missing_request, p).holds);

  std::vector<Event> wrong_code = {ev(K::UserRequestsRegistration, alice),
                                   ev(K::WSSendsSMS, alice, code),
                                   ev(K::UserProcessesSMS, alice, arena.name("otp:999999", 1))};
  CHECK(!check_correspondence(arena, wrong_code, p).holds);
}

TEST_CASE("constant arguments pin a specific term") {
  TermArena arena;
  TermId alice = arena.host("alice");
  TermId bob = arena.host("bob");

  Property p = corr("alice-only", pat(K::CASendsId, {A::c(alice), A::any()}),
                    {{pat(K::UserRequestsRegistration, {A::c(alice)}), false}});

  // Bob's unsolicited issuance is invisible to a property about alice.
  std::vector<Event> t = {ev(K::CASendsId, bob, arena.name("id", 0))};
  CHECK(check_correspondence(arena, t, p).holds);
  t.push_back(ev(K::CASendsId, alice, arena.name("id", 1)));
  CHECK(!check_correspondence(arena, t, p).holds);
}

TEST_CASE("violations are stable under trace extension") {
  TermArena arena;
  TermId alice = arena.host("alice");
  Property p = corr("issued-after-request", pat(K::CASendsId, {A::v("h"), A::any()}),
                    {{pat(K::UserRequestsRegistration, {A::v("h")}), false}});

  std::vector<Event> t = {ev(K::CASendsId, alice, arena.name("id", 0))};
  REQUIRE(!check_correspondence(arena, t, p).holds);
  t.push_back(ev(K::UserRequestsRegistration, alice));
  t.push_back(ev(K::CASendsId, alice, arena.name("id", 1)));
  CHECK(!check_correspondence(arena, t, p).holds);  // the late request repairs nothing
}

TEST_CASE("secrecy is judged against the derivable closure") {
  TermArena arena;
  Knowledge k;
  k.add(arena, arena.host("alice"));
  k.add(arena, arena.name("link", 0));

  Property p;
  p.type = Property::Type::Secrecy;
  p.name = "identity-secrecy";
  p.secrecy.pattern = TermPattern::parse("(name id _)");

  CHECK(check_property(arena, k, {}, p).holds);

  k.add(arena, arena.name("id", 3));
  Verdict v = check_property(arena, k, {}, p);
  CHECK(!v.holds);
  CHECK(v.witness_term == arena.sexpr(arena.name("id", 3)));

  // The wrapped form is a different pattern: holding a wrapped id is not
  // the same as holding the id.
  Knowledge k2;
  TermId wrapped = id_encrypt(arena, arena.name("id", 7), arena.key("k", 1));
  k2.add(arena, wrapped);
  Property pw;
  pw.type = Property::Type::Secrecy;
  pw.name = "wrapped-identity-secrecy";
  pw.secrecy.pattern = TermPattern::parse("(ienc (name id _) _)");
  CHECK(!check_property(arena, k2, {}, pw).holds);
  CHECK(check_property(arena, k2, {}, p).holds);  // the id itself stays opaque
}

TEST_CASE("first violation respects declaration order") {
  TermArena arena;
  TermId alice = arena.host("alice");
  Property a = corr("a", pat(K::CASendsId, {A::v("h"), A::any()}),
                    {{pat(K::UserRequestsRegistration, {A::v("h")}), false}});
  Property b = corr("b", pat(K::CASendsId, {A::v("h"), A::any()}),
                    {{pat(K::WSSendsLink, {A::v("h"), A::any()}), false}});
  std::vector<Event> t = {ev(K::CASendsId, alice, arena.name("id", 0))};
  Knowledge k;

  auto v = first_violation(arena, k, t, {a, b});
  REQUIRE(v.has_value());
  CHECK(v->property == "a");
  v = first_violation(arena, k, t, {b, a});
  REQUIRE(v.has_value());
  CHECK(v->property == "b");
  CHECK(!first_violation(arena, k, {}, {a, b}).has_value());
}

TEST_CASE("the built-in suite has the documented shape") {
  TermArena arena;
  auto names = [](const std::vector<Property>& ps) {
    std::vector<std::string> out;
    for (const Property& p : ps) out.push_back(p.name);
    return out;
  };

  auto chatsrp = builtin_properties(arena, Variant::ChatSrp, false);
  CHECK(names(chatsrp) == std::vector<std::string>{
                              "identity-secrecy", "wrapped-identity-secrecy",
                              "issuance-needs-request", "received-id-was-issued",
                              "sms-round-authenticates", "registration-data-is-authentic"});

  auto diag = builtin_properties(arena, Variant::ChatSrp, true);
  CHECK(diag.size() == 7);
  CHECK(diag.back().name == "sms-sent-only-on-request");

  auto nosms = builtin_properties(arena, Variant::ChatSrpNoSms, false);
  CHECK(nosms.size() == 5);
  for (const Property& p : nosms) CHECK(p.name != "sms-round-authenticates");

  auto ebia = builtin_properties(arena, Variant::Ebia, false);
  REQUIRE(ebia.size() == 1);
  CHECK(ebia[0].name == "id-issued-only-on-registration");
}

TEST_CASE("property files parse and reject malformed input") {
  TermArena arena;
  const char* good = R"json({
    "properties": [
      {"type": "secrecy", "name": "s", "pattern": "(name id _)"},
      {"type": "correspondence", "name": "c", "description": "d",
       "antecedent": {"event": "CASendsId", "args": ["h", "_"]},
       "consequents": [
         {"event": "UserRequestsRegistration", "args": ["h"], "injective": true},
         {"event": "WSSendsLink", "args": ["h", "(name link 0)"]}
       ]}
    ]
  })json";
  auto props = properties_from_json(good, arena);
  REQUIRE(props.size() == 2);
  CHECK(props[0].type == Property::Type::Secrecy);
  CHECK(props[1].type == Property::Type::Correspondence);
  REQUIRE(props[1].corr.consequents.size() == 2);
  CHECK(props[1].corr.consequents[0].injective);
  CHECK(!props[1].corr.consequents[1].injective);
  CHECK(props[1].corr.consequents[1].pattern.args[1].kind == EventArg::Kind::Const);
  CHECK(props[1].corr.consequents[1].pattern.args[1].value == arena.name("link", 0));
  CHECK(props[1].corr.antecedent.args[0].kind == EventArg::Kind::Var);

  CHECK_THROWS_AS(properties_from_json("not json", arena), ConfigError);
  CHECK_THROWS_AS(properties_from_json(R"json({"properties": [{"type": "nope", "name": "x"}]})json", arena),
                  ConfigError);
  // Wrong arity for the event.
  CHECK_THROWS_AS(properties_from_json(R"json({
    "properties": [{"type": "correspondence", "name": "c",
      "antecedent": {"event": "CASendsId", "args": ["h"]},
      "consequents": [{"event": "WSSendsLink", "args": ["h", "_"]}]}]})json",
                                       arena),
                  ConfigError);
  // Unknown event name.
  CHECK_THROWS_AS(properties_from_json(R"json({
    "properties": [{"type": "correspondence", "name": "c",
      "antecedent": {"event": "NoSuchEvent", "args": []},
      "consequents": [{"event": "WSSendsLink", "args": ["h", "_"]}]}]})json",
                                       arena),
                  ConfigError);
  // A correspondence with no consequents is meaningless.
  CHECK_THROWS_AS(properties_from_json(R"json({
    "properties": [{"type": "correspondence", "name": "c",
      "antecedent": {"event": "CASendsId", "args": ["h", "_"]},
      "consequents": []}]})json",
                                       arena),
                  ConfigError);
}
