#include "chatsrp/protocol.hpp"

#include <vector>

#include "chatsrp/fixture.hpp"
#include "chatsrp/system.hpp"
#include "doctest.h"

using namespace chatsrp;

namespace {

std::vector<EventKind> kinds(const std::vector<Event>& evs) {
  std::vector<EventKind> out;
  out.reserve(evs.size());
  for (const Event& e : evs) out.push_back(e.kind);
  return out;
}

// One user's honest event skeleton, per variant.
std::vector<EventKind> honest_skeleton(Variant v) {
  using K = EventKind;
  switch (v) {
    case Variant::ChatSrp:
      return {K::UserRequestsRegistration, K::WSSendsSMS, K::UserProcessesSMS,
              K::RASendsTicket, K::WSSendsLink, K::UserReceivesRegistrationData,
              K::CASendsId, K::UserReceivesId};
    case Variant::ChatSrpNoSms:
      return {K::UserRequestsRegistration, K::RASendsTicket, K::WSSendsLink,
              K::UserReceivesRegistrationData, K::CASendsId, K::UserReceivesId};
    case Variant::Ebia:
      return {K::UserRequestsRegistration, K::WSSendsLink,
              K::UserReceivesRegistrationData, K::CASendsId, K::UserReceivesId};
  }
  return {};
}

const Event& last_of(const std::vector<Event>& evs, EventKind k, TermId host) {
  const Event* found = nullptr;
  for (const Event& e : evs)
    if (e.kind == k && e.host == host) found = &e;
  REQUIRE(found != nullptr);
  return *found;
}

}  // namespace

TEST_CASE("honest runs walk the designed event sequence") {
  for (Variant v : {Variant::ChatSrp, Variant::ChatSrpNoSms, Variant::Ebia}) {
    CAPTURE(to_string(v));
    TermArena arena;
    Fixture fx = default_fixture(v);
    System sys(fx, arena);
    Trace t = run_honest(sys);

    // One full skeleton per user, users in fixture order.
    std::vector<EventKind> expect;
    for (int i = 0; i < 2; ++i)
      for (EventKind k : honest_skeleton(v)) expect.push_back(k);
    CHECK(kinds(t.events) == expect);

    TermId alice = arena.host("alice");
    TermId bob = arena.host("bob");
    for (TermId u : {alice, bob}) {
      // The id the CA mints is the id the user ends up holding.
      const Event& issued = last_of(t.events, EventKind::CASendsId, u);
      const Event& got = last_of(t.events, EventKind::UserReceivesId, u);
      CHECK(issued.a == got.a);

      const Principal* p = sys.by_host(u);
      REQUIRE(p);
      CHECK(p->user.phase == UserState::Phase::Done);
      CHECK(p->user.id == got.a);

      if (v != Variant::Ebia) {
        // Registration data seen by the user matches what WS/RA emitted.
        const Event& regdata = last_of(t.events, EventKind::UserReceivesRegistrationData, u);
        CHECK(regdata.a == last_of(t.events, EventKind::RASendsTicket, u).a);
        CHECK(regdata.b == last_of(t.events, EventKind::WSSendsLink, u).a);
      }
      if (v == Variant::ChatSrp) {
        CHECK(last_of(t.events, EventKind::WSSendsSMS, u).a ==
              last_of(t.events, EventKind::UserProcessesSMS, u).a);
      }
    }

    if (v != Variant::Ebia) {
      const Principal* ra = sys.by_label("ra");
      REQUIRE(ra);
      CHECK(ra->ra.pending.size() == 0);  // every ticket redeemed and deleted
      const Principal* ca = sys.by_label("ca");
      REQUIRE(ca);
      CHECK(ca->ca.issued == 2);
    }
    CHECK(sys.in_flight().empty());
    CHECK(sys.quiescent());
  }
}

TEST_CASE("honest runs are deterministic for a fixed seed") {
  for (Variant v : {Variant::ChatSrp, Variant::ChatSrpNoSms}) {
    TermArena a1, a2;
    Fixture fx = default_fixture(v);
    System s1(fx, a1), s2(fx, a2);
    Trace t1 = run_honest(s1), t2 = run_honest(s2);
    auto render = [](const TermArena& a, TermId t) {
      return t == kNoTerm ? std::string("-") : a.sexpr(t);
    };
    REQUIRE(t1.events.size() == t2.events.size());
    for (size_t i = 0; i < t1.events.size(); ++i) {
      CHECK(render(a1, t1.events[i].a) == render(a2, t2.events[i].a));
      CHECK(render(a1, t1.events[i].b) == render(a2, t2.events[i].b));
    }
    CHECK(s1.digest() == s2.digest());

    Fixture other = fx;
    other.seed ^= 0xdeadbeefULL;
    TermArena a3;
    System s3(other, a3);
    Trace t3 = run_honest(s3);
    // Different seed, different fresh material: same shape, different terms.
    CHECK(kinds(t1.events) == kinds(t3.events));
    CHECK(a1.sexpr(last_of(t1.events, EventKind::RASendsTicket, a1.host("alice")).a) !=
          a3.sexpr(last_of(t3.events, EventKind::RASendsTicket, a3.host("alice")).a));
  }
}

namespace {

struct RaRig {
  TermArena arena;
  TentPrng prng{0x1234, 0x8000000000000000ull};
  FreshNames fresh;
  SessionTable sessions;
  RaState ra;
  TermId ws_host, ra_host, ca_host, alice;
  StepCtx ctx;

  RaRig()
      : ws_host(arena.host("ws")),
        ra_host(arena.host("ra")),
        ca_host(arena.host("ca")),
        alice(arena.host("alice")),
        ctx{arena, prng, fresh, sessions, Variant::ChatSrp, ws_host, ra_host, ca_host} {
    ra.host = ra_host;
    ra.k_wr = arena.key("k_wr", 0);
    ra.k_rc = arena.key("k_rc", 0);
  }

  TermId wrap(std::initializer_list<TermId> parts, TermId key) {
    auto it = parts.end();
    TermId t = *--it;
    while (it != parts.begin()) t = arena.pair(*--it, t);
    return sym_encrypt(arena, t, key);
  }

  ChannelMsg public_msg(TermId payload) {
    return ChannelMsg{{ChannelKind::Public, 0}, payload, ws_host, ra_host, 0};
  }
};

}  // namespace

TEST_CASE("ticket store: one pending request per email") {
  RaRig rig;
  TermId req = rig.wrap({rig.arena.tag("msg2"), rig.ws_host, rig.ra_host, rig.alice},
                        rig.ra.k_wr);

  StepResult first = ra_step(rig.ra, rig.public_msg(req), rig.ctx);
  CHECK(first.accepted);
  REQUIRE(rig.ra.pending.find(rig.alice) != nullptr);
  TermId ticket = rig.ra.pending.find(rig.alice)->ticket;
  CHECK(rig.arena[ticket].kind == TermKind::Hash);
  REQUIRE(first.events.size() == 1);
  CHECK(first.events[0].kind == EventKind::RASendsTicket);
  CHECK(first.events[0].a == ticket);

  // A second request for the same email must not mint a second ticket.
  StepResult second = ra_step(rig.ra, rig.public_msg(req), rig.ctx);
  CHECK(!second.accepted);
  CHECK(second.events.empty());
  CHECK(second.outbound.empty());
  CHECK(rig.ra.pending.find(rig.alice)->ticket == ticket);
  CHECK(rig.ra.pending.size() == 1);
}

TEST_CASE("ticket store: redemption is single use and deletes the entry") {
  RaRig rig;
  TermId req = rig.wrap({rig.arena.tag("msg2"), rig.ws_host, rig.ra_host, rig.alice},
                        rig.ra.k_wr);
  REQUIRE(ra_step(rig.ra, rig.public_msg(req), rig.ctx).accepted);
  TermId ticket = rig.ra.pending.find(rig.alice)->ticket;
  TermId wrap_key = rig.arena.key("k_u", 9);

  TermId redeem = rig.wrap(
      {rig.arena.tag("msg6"), rig.ws_host, rig.ra_host, rig.alice, ticket, wrap_key},
      rig.ra.k_wr);

  SUBCASE("wrong ticket bounces and keeps the entry") {
    TermId wrong = rig.arena.hash_term(rig.arena.pair(rig.arena.name("n", 7), rig.alice));
    TermId bad = rig.wrap(
        {rig.arena.tag("msg6"), rig.ws_host, rig.ra_host, rig.alice, wrong, wrap_key},
        rig.ra.k_wr);
    StepResult r = ra_step(rig.ra, rig.public_msg(bad), rig.ctx);
    CHECK(!r.accepted);
    CHECK(rig.ra.pending.find(rig.alice) != nullptr);
  }

  SUBCASE("good ticket redeems once, then never again") {
    StepResult r = ra_step(rig.ra, rig.public_msg(redeem), rig.ctx);
    CHECK(r.accepted);
    CHECK(rig.ra.pending.find(rig.alice) == nullptr);  // deleted on redemption
    REQUIRE(r.outbound.size() == 1);
    // The wrap key rides through to the issuer untouched.
    DecryptResult fwd = sym_decrypt(rig.arena, r.outbound[0].payload, rig.ra.k_rc);
    REQUIRE(fwd.ok());

    StepResult replay = ra_step(rig.ra, rig.public_msg(redeem), rig.ctx);
    CHECK(!replay.accepted);
    CHECK(replay.outbound.empty());
    CHECK(rig.ra.pending.find(rig.alice) == nullptr);

    // Redeeming again after a fresh request also fails: the new pending
    // entry carries a fresh nonce, so the old ticket no longer matches.
    REQUIRE(ra_step(rig.ra, rig.public_msg(req), rig.ctx).accepted);
    StepResult stale = ra_step(rig.ra, rig.public_msg(redeem), rig.ctx);
    CHECK(!stale.accepted);
    CHECK(rig.ra.pending.find(rig.alice) != nullptr);
  }
}

TEST_CASE("ws drops out-of-phase and mismatched traffic") {
  TermArena arena;
  TentPrng prng(0xfeed, 0x8000000000000001ull);
  FreshNames fresh;
  SessionTable sessions;
  TermId ws_host = arena.host("ws");
  TermId alice = arena.host("alice");
  TermId mallory = arena.host("mallory");
  StepCtx ctx{arena, prng, fresh, sessions, Variant::ChatSrp, ws_host,
              arena.host("ra"), arena.host("ca")};

  WsState ws;
  ws.host = ws_host;
  ws.k_wr = arena.key("k_wr", 0);
  ws.phones[alice] = "+15550001";

  auto over_ssl = [&](const SslSessionInfo& s, TermId body) {
    return ChannelMsg{{ChannelKind::Ssl, s.id}, sym_encrypt(arena, body, s.key),
                      s.claimed_host, ws_host, 0};
  };
  auto tup = [&](std::initializer_list<TermId> parts) {
    auto it = parts.end();
    TermId t = *--it;
    while (it != parts.begin()) t = arena.pair(*--it, t);
    return t;
  };

  const SslSessionInfo s1 = sessions.negotiate(arena, alice, false);
  TermId req = tup({arena.tag("msg1"), alice, ws_host});

  SUBCASE("registration needs a verified phone") {
    const SslSessionInfo sm = sessions.negotiate(arena, mallory, false);
    StepResult r = ws_step(ws, over_ssl(sm, tup({arena.tag("msg1"), mallory, ws_host})), ctx);
    CHECK(!r.accepted);
    CHECK(ws.regs.empty());
  }

  SUBCASE("the code echo must carry the code on file") {
    REQUIRE(ws_step(ws, over_ssl(s1, req), ctx).accepted);
    CHECK(ws.regs.at(alice).phase == WsReg::Phase::AwaitCode);
    TermId otp = ws.regs.at(alice).otp;

    TermId wrong = arena.name("otp:000000");
    REQUIRE(wrong != otp);
    StepResult bad = ws_step(ws, over_ssl(s1, tup({arena.tag("msgcode"), alice, ws_host, wrong})), ctx);
    CHECK(!bad.accepted);
    CHECK(ws.regs.at(alice).phase == WsReg::Phase::AwaitCode);

    // A session claiming a different host cannot speak for alice.
    const SslSessionInfo sm = sessions.negotiate(arena, mallory, false);
    StepResult spoof = ws_step(ws, over_ssl(sm, tup({arena.tag("msgcode"), alice, ws_host, otp})), ctx);
    CHECK(!spoof.accepted);

    StepResult good = ws_step(ws, over_ssl(s1, tup({arena.tag("msgcode"), alice, ws_host, otp})), ctx);
    CHECK(good.accepted);
    CHECK(ws.regs.at(alice).phase == WsReg::Phase::AwaitTicket);
    REQUIRE(good.outbound.size() == 1);
    CHECK(good.outbound[0].dst == arena.host("ra"));
  }

  SUBCASE("a second registration attempt mid-flow is refused") {
    REQUIRE(ws_step(ws, over_ssl(s1, req), ctx).accepted);
    const SslSessionInfo s1b = sessions.negotiate(arena, alice, false);
    StepResult again = ws_step(ws, over_ssl(s1b, req), ctx);
    CHECK(!again.accepted);
  }
}

TEST_CASE("user cross-checks the two registration-data halves") {
  TermArena arena;
  TentPrng prng(42, 0x8000000000000000ull);
  FreshNames fresh;
  SessionTable sessions;
  TermId ws_host = arena.host("ws");
  StepCtx ctx{arena, prng, fresh, sessions, Variant::ChatSrp, ws_host,
              arena.host("ra"), arena.host("ca")};

  UserState u;
  u.host = arena.host("alice");
  u.phase = UserState::Phase::AwaitRegData;
  const SslSessionInfo& s2 = sessions.negotiate(arena, u.host, false);
  u.s2 = s2.id;

  TermId ticket = arena.hash_term(arena.pair(arena.name("n", 0), u.host));
  TermId link = arena.name("link", 0);
  TermId other = arena.name("link", 1);

  auto ssl_half = [&](TermId l) {
    TermId body = arena.pair(
        arena.tag("msg4"),
        arena.pair(ws_host, arena.pair(u.host, arena.pair(ticket, l))));
    return ChannelMsg{{ChannelKind::Ssl, s2.id}, sym_encrypt(arena, body, s2.key),
                      ws_host, u.host, 0};
  };
  auto smtp_half = [&](TermId l) {
    return ChannelMsg{{ChannelKind::Smtp, 0}, l, ws_host, u.host, 0};
  };

  SUBCASE("matching halves complete, in either order") {
    CHECK(user_step(u, ssl_half(link), ctx).accepted);
    CHECK(u.phase == UserState::Phase::AwaitRegData);  // still waiting for email
    StepResult done = user_step(u, smtp_half(link), ctx);
    CHECK(done.accepted);
    REQUIRE(done.events.size() == 1);
    CHECK(done.events[0].kind == EventKind::UserReceivesRegistrationData);
    CHECK(u.phase == UserState::Phase::AwaitId);
  }

  SUBCASE("a disagreeing emailed link is refused once the protected half is in") {
    REQUIRE(user_step(u, ssl_half(link), ctx).accepted);
    StepResult r = user_step(u, smtp_half(other), ctx);
    CHECK(!r.accepted);
    CHECK(!u.have_smtp_half);
    CHECK(u.phase == UserState::Phase::AwaitRegData);
  }

  SUBCASE("a disagreeing protected half is refused once the email is in") {
    REQUIRE(user_step(u, smtp_half(other), ctx).accepted);
    StepResult r = user_step(u, ssl_half(link), ctx);
    CHECK(!r.accepted);
    CHECK(!u.have_ssl_half);
  }

  SUBCASE("duplicate halves are dropped") {
    REQUIRE(user_step(u, ssl_half(link), ctx).accepted);
    CHECK(!user_step(u, ssl_half(link), ctx).accepted);
  }
}

TEST_CASE("baseline activation links are single use") {
  TermArena arena;
  TentPrng prng(7, 0x8000000000000000ull);
  FreshNames fresh;
  SessionTable sessions;
  TermId ws_host = arena.host("ws");
  TermId alice = arena.host("alice");
  StepCtx ctx{arena, prng, fresh, sessions, Variant::Ebia, ws_host, kNoTerm, kNoTerm};

  WsState ws;
  ws.host = ws_host;
  ChannelMsg req{{ChannelKind::Public, 0}, arena.pair(arena.tag("msg1"), alice),
                 alice, ws_host, 0};
  StepResult r1 = ebia_step(ws, req, ctx);
  REQUIRE(r1.accepted);
  TermId link = ws.regs.at(alice).link;

  ChannelMsg access{{ChannelKind::Public, 0}, link, alice, ws_host, 0};
  StepResult first = ebia_step(ws, access, ctx);
  CHECK(first.accepted);
  REQUIRE(first.events.size() == 1);
  CHECK(first.events[0].kind == EventKind::CASendsId);

  StepResult second = ebia_step(ws, access, ctx);
  CHECK(!second.accepted);
  CHECK(second.events.empty());
}
