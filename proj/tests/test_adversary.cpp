#include "chatsrp/adversary.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "chatsrp/fixture.hpp"
#include "chatsrp/system.hpp"
#include "doctest.h"

using namespace chatsrp;

TEST_CASE("knowledge saturates under destructors") {
  TermArena a;
  Knowledge k;
  TermId key = a.key("k", 0);
  TermId secret = a.name("s", 0);
  TermId inner = a.sym_enc_term(secret, key);
  TermId outer = a.pair(a.tag("t"), a.pair(inner, key));

  CHECK(!k.derivable(a, secret));
  k.add(a, outer);
  // One observation tears the whole nest apart: projection exposes the key,
  // the key opens the ciphertext.
  CHECK(k.derivable(a, secret));
  CHECK(k.derivable(a, key));
  CHECK(k.derivable(a, inner));
}

TEST_CASE("ciphertext without key stays opaque, and opens later") {
  TermArena a;
  Knowledge k;
  TermId key = a.key("k", 1);
  TermId secret = a.name("s", 1);
  TermId ct = a.sym_enc_term(secret, key);

  k.add(a, ct);
  CHECK(k.derivable(a, ct));  // can always replay the blob itself
  CHECK(!k.derivable(a, secret));
  CHECK(!k.derivable(a, key));

  // Learning the key must retroactively open the stored ciphertext.
  k.add(a, key);
  CHECK(k.derivable(a, secret));
}

TEST_CASE("hash is one way but constructible forward") {
  TermArena a;
  Knowledge k;
  TermId n = a.name("n", 0);
  TermId e = a.host("alice");
  TermId ticket = a.hash_term(a.pair(n, e));

  k.add(a, ticket);
  k.add(a, e);
  CHECK(k.derivable(a, ticket));
  CHECK(!k.derivable(a, n));  // no preimages

  Knowledge forward;
  forward.add(a, n);
  forward.add(a, e);
  CHECK(forward.derivable(a, ticket));  // hashing forward is free
}

TEST_CASE("id-wrapped terms need the id key, not the sym key") {
  TermArena a;
  Knowledge k;
  TermId wrap = a.key("wk", 0);
  TermId sym = a.key("sk", 0);
  TermId id = a.name("id", 0);
  TermId eid = a.id_enc_term(id, wrap);

  k.add(a, a.sym_enc_term(eid, sym));
  k.add(a, sym);
  CHECK(k.derivable(a, eid));
  CHECK(!k.derivable(a, id));
  k.add(a, wrap);
  CHECK(k.derivable(a, id));
}

TEST_CASE("knowledge is monotone") {
  TermArena a;
  Knowledge k;
  std::mt19937_64 rng(7);
  std::vector<TermId> pool;
  for (int i = 0; i < 6; ++i) pool.push_back(a.name("x", i));
  for (int i = 0; i < 6; ++i) pool.push_back(a.key("y", i));
  for (int i = 0; i < 40; ++i) {
    TermId x = pool[rng() % pool.size()];
    TermId y = pool[rng() % pool.size()];
    pool.push_back(rng() % 2 ? a.pair(x, y) : a.sym_enc_term(x, y));
  }

  std::vector<TermId> so_far;
  for (int i = 0; i < 30; ++i) {
    TermId t = pool[rng() % pool.size()];
    k.add(a, t);
    so_far.push_back(t);
    for (TermId prev : so_far) CHECK(k.derivable(a, prev));
  }
}

namespace {

// Replays a derivation tree bottom-up and checks every internal rule
// application really produces its parent from its premises.
bool derivation_checks_out(const TermArena& a, const Knowledge::Derivation& d,
                           const std::set<TermId>& observed) {
  for (const auto& p : d.premises)
    if (!derivation_checks_out(a, p, observed)) return false;
  const auto& ps = d.premises;
  if (d.rule == "observed") return observed.count(d.term) != 0;
  if (d.rule == "fst")
    return ps.size() == 1 && a[ps[0].term].kind == TermKind::Pair &&
           a[ps[0].term].left == d.term;
  if (d.rule == "snd")
    return ps.size() == 1 && a[ps[0].term].kind == TermKind::Pair &&
           a[ps[0].term].right == d.term;
  if (d.rule == "sdec")
    return ps.size() == 2 && a[ps[0].term].kind == TermKind::SymEnc &&
           a[ps[0].term].left == d.term && a[ps[0].term].right == ps[1].term;
  if (d.rule == "idec")
    return ps.size() == 2 && a[ps[0].term].kind == TermKind::IdEnc &&
           a[ps[0].term].left == d.term && a[ps[0].term].right == ps[1].term;
  if (d.rule == "pair")
    return ps.size() == 2 && a[d.term].kind == TermKind::Pair &&
           a[d.term].left == ps[0].term && a[d.term].right == ps[1].term;
  if (d.rule == "senc")
    return ps.size() == 2 && a[d.term].kind == TermKind::SymEnc &&
           a[d.term].left == ps[0].term && a[d.term].right == ps[1].term;
  if (d.rule == "ienc")
    return ps.size() == 2 && a[d.term].kind == TermKind::IdEnc &&
           a[d.term].left == ps[0].term && a[d.term].right == ps[1].term;
  if (d.rule == "hash")
    return ps.size() == 1 && a[d.term].kind == TermKind::Hash &&
           a[d.term].left == ps[0].term;
  return false;
}

// Independent closure oracle. Dolev-Yao derivations normalize to "analyze,
// then synthesize": every intermediate term is a subterm of the base or of
// the target. So a fixpoint over that finite universe — destructors freely,
// constructors only toward universe members — decides derivability exactly.
void collect_subterms(const TermArena& a, TermId t, std::set<TermId>& out) {
  if (t == kNoTerm || !out.insert(t).second) return;
  const Term& n = a[t];
  switch (n.kind) {
    case TermKind::Pair:
    case TermKind::SymEnc:
    case TermKind::IdEnc:
      collect_subterms(a, n.left, out);
      collect_subterms(a, n.right, out);
      break;
    case TermKind::Hash:
      collect_subterms(a, n.left, out);
      break;
    default:
      break;
  }
}

bool oracle_derivable(const TermArena& a, const std::vector<TermId>& base, TermId target) {
  std::set<TermId> universe;
  for (TermId b : base) collect_subterms(a, b, universe);
  collect_subterms(a, target, universe);

  std::set<TermId> s(base.begin(), base.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<TermId> snapshot(s.begin(), s.end());
    for (TermId t : snapshot) {
      const Term& n = a[t];
      if (n.kind == TermKind::Pair) {
        changed |= s.insert(n.left).second;
        changed |= s.insert(n.right).second;
      } else if ((n.kind == TermKind::SymEnc || n.kind == TermKind::IdEnc) &&
                 s.count(n.right)) {
        changed |= s.insert(n.left).second;
      }
    }
    for (TermId u : universe) {
      if (s.count(u)) continue;
      const Term& n = a[u];
      bool can = false;
      switch (n.kind) {
        case TermKind::Pair:
        case TermKind::SymEnc:
        case TermKind::IdEnc:
          can = s.count(n.left) && s.count(n.right);
          break;
        case TermKind::Hash:
          can = s.count(n.left) != 0;
          break;
        default:
          can = false;  // leaves are never invented
      }
      if (can) {
        s.insert(u);
        changed = true;
      }
    }
  }
  return s.count(target) != 0;
}

TermId random_term(TermArena& a, std::mt19937_64& rng, int depth) {
  int pick = depth == 0 ? static_cast<int>(rng() % 4) : static_cast<int>(rng() % 8);
  switch (pick) {
    case 0: return a.name("n", static_cast<uint32_t>(rng() % 4));
    case 1: return a.key("k", static_cast<uint32_t>(rng() % 3));
    case 2: return a.host(rng() % 2 ? "alice" : "bob");
    case 3: return a.tag(rng() % 2 ? "t0" : "t1");
    case 4: return a.pair(random_term(a, rng, depth - 1), random_term(a, rng, depth - 1));
    case 5:
      return a.sym_enc_term(random_term(a, rng, depth - 1), random_term(a, rng, depth - 1));
    case 6:
      return a.id_enc_term(random_term(a, rng, depth - 1), random_term(a, rng, depth - 1));
    default: return a.hash_term(random_term(a, rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("derivation trees replay against the rule set") {
  TermArena a;
  Knowledge k;
  std::set<TermId> observed;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 40; ++i) {
    TermId t = random_term(a, rng, 3);
    observed.insert(t);
    k.add(a, t);
  }
  for (TermId t : k.analyzed()) {
    auto d = k.derive(a, t);
    REQUIRE(d.has_value());
    CHECK(d->term == t);
    CHECK(derivation_checks_out(a, *d, observed));
  }
}

TEST_CASE("derivability agrees with the independent closure oracle") {
  TermArena a;
  std::mt19937_64 rng(0x5eedULL);
  int checked = 0;
  for (int round = 0; round < 1000; ++round) {
    std::vector<TermId> base;
    size_t nbase = 1 + rng() % 8;
    for (size_t i = 0; i < nbase; ++i) base.push_back(random_term(a, rng, 3));

    Knowledge k;
    for (TermId b : base) k.add(a, b);

    // Probe both fresh random terms and terms related to the base.
    std::vector<TermId> probes;
    for (int i = 0; i < 4; ++i) probes.push_back(random_term(a, rng, 3));
    probes.push_back(base[rng() % base.size()]);
    std::set<TermId> subs;
    collect_subterms(a, base[rng() % base.size()], subs);
    probes.push_back(*std::next(subs.begin(), static_cast<long>(rng() % subs.size())));

    for (TermId p : probes) {
      bool fast = k.derivable(a, p);
      bool slow = oracle_derivable(a, base, p);
      CHECK(fast == slow);
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("bounded closure enumeration contains what it promises") {
  TermArena a;
  Knowledge k;
  TermId n = a.name("n", 0);
  TermId kk = a.key("k", 0);
  k.add(a, n);
  k.add(a, kk);
  std::vector<TermId> closed = k.close(a, 2);
  auto has = [&](TermId t) {
    return std::binary_search(closed.begin(), closed.end(), t);
  };
  CHECK(has(n));
  CHECK(has(a.pair(n, kk)));
  CHECK(has(a.hash_term(n)));
  CHECK(has(a.sym_enc_term(a.pair(n, kk), kk)));  // depth 2
  for (TermId t : closed) CHECK(k.derivable(a, t));
}

TEST_CASE("attacker enumeration: payloads derivable, private channels untouched") {
  TermArena arena;
  Fixture fx = default_fixture(Variant::ChatSrp);
  fx.attacker = AttackerMode::Active;
  System sys(fx, arena);

  // Walk a few honest deliveries in, then look at the menu.
  Action start;
  start.kind = Action::Kind::StartUser;
  start.user = "alice";
  REQUIRE(sys.apply(start).valid);

  for (int step = 0; step < 6; ++step) {
    std::vector<Action> acts = sys.enabled_actions();
    const Knowledge& k = sys.knowledge();
    for (const Action& a : acts) {
      if (a.kind == Action::Kind::Inject) {
        CHECK(a.forged.channel.visible_to_attacker());
        CHECK(k.derivable(sys.arena(), a.forged.payload));
      }
      if (a.kind == Action::Kind::Block || a.kind == Action::Kind::Observe) {
        // only visible in-flight messages may be touched
        bool found = false;
        for (const ChannelMsg& m : sys.in_flight())
          if (m.send_index == a.msg_index) {
            found = true;
            CHECK(m.channel.visible_to_attacker());
          }
        CHECK(found);
      }
    }
    // take the first deliver we can find to move the protocol along
    auto it = std::find_if(acts.begin(), acts.end(), [](const Action& a) {
      return a.kind == Action::Kind::Deliver;
    });
    if (it == acts.end()) break;
    REQUIRE(sys.apply(*it).valid);
  }
}

namespace {

std::tuple<int, uint32_t, TermId, TermId> inject_key(const Action& a) {
  return {static_cast<int>(a.forged.channel.kind), a.forged.channel.session,
          a.forged.payload, a.forged.dst};
}

// Drives a seeded random walk and, at every state, applies each candidate
// the filtered enumeration dropped. A drop is only legal if the candidate
// does nothing; an effective candidate missing from the filtered menu means
// the filter lost an attack and exploration is no longer exhaustive.
void check_filter_against_handlers(Variant variant, uint64_t seed, int steps) {
  TermArena arena;
  Fixture fx = default_fixture(variant);
  fx.attacker = AttackerMode::Active;
  System sys(fx, arena);
  std::mt19937_64 rng(seed);

  for (int step = 0; step < steps; ++step) {
    std::vector<Action> filtered =
        attacker_choices(sys.arena(), sys.attacker_view(), sys.in_flight(), true);
    std::vector<Action> superset =
        attacker_choices(sys.arena(), sys.attacker_view(), sys.in_flight(), false);

    std::set<std::tuple<int, uint32_t, TermId, TermId>> kept;
    for (const Action& a : filtered)
      if (a.kind == Action::Kind::Inject) kept.insert(inject_key(a));

    for (const Action& a : superset) {
      if (a.kind != Action::Kind::Inject) continue;
      if (kept.count(inject_key(a))) continue;
      System probe = sys;
      ApplyOutcome out = probe.apply(a);
      CHECK(out.valid);
      CHECK(!out.effective);
    }

    std::vector<Action> acts = sys.enabled_actions();
    if (acts.empty()) break;
    size_t before = sys.knowledge().analyzed().size();
    ApplyOutcome out = sys.apply(acts[rng() % acts.size()]);
    CHECK(out.valid);
    CHECK(sys.knowledge().analyzed().size() >= before);  // monotone along any walk
  }
}

}  // namespace

TEST_CASE("filtered enumeration never hides an effective forgery") {
  check_filter_against_handlers(Variant::ChatSrp, 101, 60);
  check_filter_against_handlers(Variant::ChatSrp, 202, 60);
  check_filter_against_handlers(Variant::ChatSrpNoSms, 303, 60);
  check_filter_against_handlers(Variant::ChatSrpNoSms, 404, 60);
  check_filter_against_handlers(Variant::Ebia, 505, 40);
}
