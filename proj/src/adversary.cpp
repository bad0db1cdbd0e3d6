#include "chatsrp/adversary.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace chatsrp {

const char* to_string(Action::Kind k) {
  switch (k) {
    case Action::Kind::StartUser: return "start_user";
    case Action::Kind::Deliver: return "deliver";
    case Action::Kind::Block: return "block";
    case Action::Kind::Observe: return "observe";
    case Action::Kind::Inject: return "inject";
    case Action::Kind::SslBypass: return "ssl_bypass";
  }
  return "?";
}

bool Knowledge::insert(const TermArena&, TermId t, const char* rule, TermId p1, TermId p2) {
  if (t == kNoTerm) return false;
  auto it = std::lower_bound(analyzed_.begin(), analyzed_.end(), t);
  if (it != analyzed_.end() && *it == t) return false;
  analyzed_.insert(it, t);
  prov_.push_back({t, rule, p1, p2});
  ++version_;
  return true;
}

void Knowledge::saturate(const TermArena& arena) {
  bool changed = true;
  while (changed) {
    changed = false;
    // analyzed_ may grow while we scan; the outer loop re-scans until stable.
    std::vector<TermId> snapshot = analyzed_;
    for (TermId t : snapshot) {
      const Term& node = arena[t];
      switch (node.kind) {
        case TermKind::Pair:
          changed |= insert(arena, node.left, "fst", t);
          changed |= insert(arena, node.right, "snd", t);
          break;
        case TermKind::SymEnc:
          if (!contains(node.left) && derivable(arena, node.right))
            changed |= insert(arena, node.left, "sdec", t, node.right);
          break;
        case TermKind::IdEnc:
          if (!contains(node.left) && derivable(arena, node.right))
            changed |= insert(arena, node.left, "idec", t, node.right);
          break;
        default:
          break;
      }
    }
  }
}

bool Knowledge::add(const TermArena& arena, TermId t) {
  bool grew = insert(arena, t, "observed");
  if (grew) saturate(arena);
  return grew;
}

bool Knowledge::derivable(const TermArena& arena, TermId t) const {
  if (t == kNoTerm) return false;
  if (memo_version_ != version_) {
    memo_.clear();
    memo_version_ = version_;
  }
  if (contains(t)) return true;
  auto it = memo_.find(t);
  if (it != memo_.end()) return it->second;
  const Term& node = arena[t];
  bool res = false;
  switch (node.kind) {
    case TermKind::Pair:
    case TermKind::SymEnc:
    case TermKind::IdEnc:
      res = derivable(arena, node.left) && derivable(arena, node.right);
      break;
    case TermKind::Hash:
      res = derivable(arena, node.left);
      break;
    default:
      res = false;  // leaves cannot be synthesized
  }
  memo_.emplace(t, res);
  return res;
}

bool Knowledge::pattern_derivable(const TermArena& arena, const TermPattern& p) const {
  if (p.wildcard) return !analyzed_.empty();
  for (TermId t : analyzed_)
    if (p.matches(arena, t)) return true;
  if (is_leaf(p.kind)) return false;  // leaves only ever come from the set
  // Otherwise the attacker may build the term itself.
  if (p.kind == TermKind::Hash) return pattern_derivable(arena, p.children[0]);
  return pattern_derivable(arena, p.children[0]) && pattern_derivable(arena, p.children[1]);
}

std::vector<TermId> Knowledge::close(TermArena& arena, int constructor_depth,
                                     size_t cap) const {
  std::vector<TermId> all = analyzed_;
  std::unordered_set<TermId> seen(all.begin(), all.end());
  auto push = [&](TermId t) {
    if (seen.insert(t).second) {
      all.push_back(t);
      if (all.size() > cap) throw std::runtime_error("closure enumeration exceeds cap");
    }
  };
  std::vector<TermId> prev = all;
  for (int d = 0; d < constructor_depth; ++d) {
    std::vector<TermId> base = all;
    for (TermId x : base) push(arena.hash_term(x));
    for (TermId x : base)
      for (TermId y : base) {
        push(arena.pair(x, y));
        push(arena.sym_enc_term(x, y));
        push(arena.id_enc_term(x, y));
      }
    if (all.size() == prev.size()) break;
    prev = all;
  }
  std::sort(all.begin(), all.end());
  return all;
}

std::optional<Knowledge::Derivation> Knowledge::derive(const TermArena& arena,
                                                       TermId t) const {
  if (!derivable(arena, t)) return std::nullopt;
  Derivation d;
  d.term = t;
  if (contains(t)) {
    auto it = std::find_if(prov_.begin(), prov_.end(),
                           [t](const Prov& p) { return p.term == t; });
    d.rule = it->rule;
    if (it->p1 != kNoTerm) d.premises.push_back(*derive(arena, it->p1));
    if (it->p2 != kNoTerm) d.premises.push_back(*derive(arena, it->p2));
    return d;
  }
  const Term& node = arena[t];
  switch (node.kind) {
    case TermKind::Pair: d.rule = "pair"; break;
    case TermKind::SymEnc: d.rule = "senc"; break;
    case TermKind::IdEnc: d.rule = "ienc"; break;
    case TermKind::Hash: d.rule = "hash"; break;
    default: return std::nullopt;
  }
  d.premises.push_back(*derive(arena, node.left));
  if (node.kind != TermKind::Hash) d.premises.push_back(*derive(arena, node.right));
  return d;
}

namespace {

TermId tuple(TermArena& a, std::initializer_list<TermId> parts) {
  auto it = parts.end();
  TermId t = *--it;
  while (it != parts.begin()) t = a.pair(*--it, t);
  return t;
}

// Same tuple convention as the principals: right-nested pairs, exactly n fields.
std::vector<TermId> untuple(const TermArena& a, TermId t, size_t n) {
  std::vector<TermId> out;
  for (size_t i = 0; i + 1 < n; ++i) {
    if (t == kNoTerm || a[t].kind != TermKind::Pair) return {};
    out.push_back(a[t].left);
    t = a[t].right;
  }
  if (t == kNoTerm) return {};
  out.push_back(t);
  return out;
}

bool is_tag(const TermArena& a, TermId t, const char* label) {
  return t != kNoTerm && a[t].kind == TermKind::Tag && a[t].label == label;
}

// First `cap` analyzed terms of a given kind, ascending TermId.
std::vector<TermId> known_of_kind(const Knowledge& k, const TermArena& arena, TermKind kind,
                                  size_t cap) {
  std::vector<TermId> out;
  for (TermId t : k.analyzed()) {
    if (arena[t].kind == kind) {
      out.push_back(t);
      if (out.size() == cap) break;
    }
  }
  return out;
}

Action inject(Channel ch, TermId payload, TermId src, TermId dst) {
  Action a;
  a.kind = Action::Kind::Inject;
  a.forged = ChannelMsg{ch, payload, src, dst, 0};
  return a;
}

// Mirrors of the receivers' acceptance guards, used to drop candidates that
// are certain to bounce. Every predicate here must stay in lockstep with the
// corresponding handler (the enumeration-filter test applies the dropped
// candidates and asserts they do nothing); when unsure, answer true.
struct Guards {
  const TermArena& A;
  const AttackerView& v;

  const SslSessionInfo* session(uint32_t id) const {
    for (const SslSessionInfo& s : *v.sessions)
      if (s.id == id) return &s;
    return nullptr;
  }
  const WsReg* reg(TermId u) const {
    if (!v.ws_state) return nullptr;
    auto it = v.ws_state->regs.find(u);
    return it == v.ws_state->regs.end() ? nullptr : &it->second;
  }
  const UserState* user(TermId h) const {
    for (const auto& [uh, st] : v.user_states)
      if (uh == h) return st;
    return nullptr;
  }

  bool ws_msg1_ok(TermId u) const {
    if (!v.ws_state) return true;
    const WsReg* r = reg(u);
    if (r && r->phase != WsReg::Phase::Done) return false;
    return v.variant == Variant::Ebia || v.ws_state->phones.count(u) != 0;
  }
  bool ws_access_ok(TermId link) const {
    if (!v.ws_state) return true;
    for (const auto& [u, r] : v.ws_state->regs)
      if (r.link == link && r.phase == WsReg::Phase::AwaitAccess &&
          (v.variant == Variant::Ebia || !r.have_access))
        return true;
    return false;
  }

  bool lands_ws(const ChannelMsg& m) const {
    if (!v.ws_state) return true;
    const WsState& ws = *v.ws_state;
    if (v.variant == Variant::Ebia) {
      if (m.channel.kind != ChannelKind::Public) return false;
      auto f = untuple(A, m.payload, 2);
      if (f.size() == 2 && is_tag(A, f[0], "msg1") && A[f[1]].kind == TermKind::Host)
        return ws_msg1_ok(f[1]);
      if (A[m.payload].kind == TermKind::Name) return ws_access_ok(m.payload);
      return false;
    }
    if (m.channel.kind == ChannelKind::Ssl) {
      const SslSessionInfo* s = session(m.channel.session);
      if (!s) return false;
      DecryptResult d = sym_decrypt(A, m.payload, s->key);
      if (!d.ok()) return false;
      auto head = untuple(A, d.term, 2);
      if (head.empty() || A[head[0]].kind != TermKind::Tag) return false;
      const std::string& tag = A[head[0]].label;
      if (tag == "msg1") {
        auto f = untuple(A, d.term, 3);
        return f.size() == 3 && f[1] == s->claimed_host && f[2] == ws.host &&
               ws_msg1_ok(f[1]);
      }
      if (tag == "msgcode") {
        if (v.variant != Variant::ChatSrp) return false;
        auto f = untuple(A, d.term, 4);
        if (f.size() != 4 || f[1] != s->claimed_host || f[2] != ws.host) return false;
        const WsReg* r = reg(f[1]);
        return r && r->phase == WsReg::Phase::AwaitCode && f[3] == r->otp;
      }
      if (tag == "msg5") {
        auto f = untuple(A, d.term, 6);
        if (f.size() != 6 || f[1] != s->claimed_host || f[2] != ws.host) return false;
        const WsReg* r = reg(f[1]);
        return r && r->phase == WsReg::Phase::AwaitAccess && f[4] == r->link &&
               !r->have_redeem;
      }
      return false;
    }
    if (m.channel.kind == ChannelKind::Public) {
      if (DecryptResult d = sym_decrypt(A, m.payload, ws.k_wr); d.ok()) {
        auto f = untuple(A, d.term, 5);
        if (f.size() != 5 || f[1] != v.ra_host || f[2] != ws.host) return false;
        const WsReg* r = reg(f[3]);
        if (is_tag(A, f[0], "msg3")) return r && r->phase == WsReg::Phase::AwaitTicket;
        if (is_tag(A, f[0], "msg9")) return r && r->phase == WsReg::Phase::AwaitEid;
        return false;
      }
      return A[m.payload].kind == TermKind::Name && ws_access_ok(m.payload);
    }
    return false;
  }

  bool lands_ra(const ChannelMsg& m) const {
    if (!v.ra_state) return true;
    const RaState& ra = *v.ra_state;
    if (m.channel.kind != ChannelKind::Public) return false;
    if (DecryptResult d = sym_decrypt(A, m.payload, ra.k_wr); d.ok()) {
      auto head = untuple(A, d.term, 2);
      TermId tag = head.empty() ? kNoTerm : head[0];
      if (is_tag(A, tag, "msg2")) {
        auto f = untuple(A, d.term, 4);
        return f.size() == 4 && f[1] == v.ws_host && f[2] == ra.host &&
               !ra.pending.has(f[3]);
      }
      if (is_tag(A, tag, "msg6")) {
        auto f = untuple(A, d.term, 6);
        if (f.size() != 6 || f[1] != v.ws_host || f[2] != ra.host) return false;
        const PendingTicket* p = ra.pending.find(f[3]);
        return p && p->ticket == f[4];
      }
      return false;
    }
    if (DecryptResult d = sym_decrypt(A, m.payload, ra.k_rc); d.ok()) {
      auto f = untuple(A, d.term, 5);
      if (f.size() != 5 || !is_tag(A, f[0], "msg8") || f[1] != v.ca_host ||
          f[2] != ra.host)
        return false;
      auto it = ra.flows.find(f[3]);
      return it != ra.flows.end() && it->second.phase == RaFlow::Phase::AwaitEid;
    }
    return false;
  }

  bool lands_ca(const ChannelMsg& m) const {
    if (!v.ra_state) return true;  // k_rc lives with the RA peek
    if (m.channel.kind != ChannelKind::Public) return false;
    DecryptResult d = sym_decrypt(A, m.payload, v.ra_state->k_rc);
    if (!d.ok()) return false;
    auto f = untuple(A, d.term, 5);
    // The issuer keeps no per-request state: a well-formed request lands every time.
    return f.size() == 5 && is_tag(A, f[0], "msg7") && f[1] == v.ra_host &&
           f[2] == m.dst && A[f[4]].kind == TermKind::Key;
  }

  bool lands_user(const UserState& u, const ChannelMsg& m) const {
    if (v.variant == Variant::Ebia) {
      if (m.channel.kind == ChannelKind::Smtp)
        return u.phase == UserState::Phase::AwaitRegData &&
               A[m.payload].kind == TermKind::Name;
      if (m.channel.kind == ChannelKind::Public) {
        if (u.phase != UserState::Phase::AwaitId) return false;
        auto f = untuple(A, m.payload, 3);
        return f.size() == 3 && is_tag(A, f[0], "msg4") && f[1] == u.host;
      }
      return false;
    }
    switch (m.channel.kind) {
      case ChannelKind::Smtp:
        return u.phase == UserState::Phase::AwaitRegData &&
               A[m.payload].kind == TermKind::Name && !u.have_smtp_half &&
               (!u.have_ssl_half || u.ssl_link == m.payload);
      case ChannelKind::Ssl: {
        const SslSessionInfo* s = session(m.channel.session);
        if (!s) return false;
        uint32_t regdata_session = v.variant == Variant::ChatSrpNoSms ? u.s1 : u.s2;
        if (u.phase == UserState::Phase::AwaitRegData &&
            m.channel.session == regdata_session) {
          DecryptResult d = sym_decrypt(A, m.payload, s->key);
          if (!d.ok()) return false;
          auto f = untuple(A, d.term, 5);
          return f.size() == 5 && is_tag(A, f[0], "msg4") && f[1] == v.ws_host &&
                 f[2] == u.host && !u.have_ssl_half &&
                 (!u.have_smtp_half || u.smtp_link == f[4]);
        }
        if (u.phase == UserState::Phase::AwaitId && m.channel.session == u.s3) {
          DecryptResult d = sym_decrypt(A, m.payload, s->key);
          if (!d.ok()) return false;
          auto f = untuple(A, d.term, 4);
          return f.size() == 4 && is_tag(A, f[0], "msg10") && f[1] == v.ws_host &&
                 f[2] == u.host && id_decrypt(A, f[3], u.wrap_key).ok();
        }
        return false;
      }
      default:
        return false;
    }
  }

  // Would this message do anything on arrival? Unknown receivers stay in.
  bool lands(const ChannelMsg& m) const {
    if (m.dst == v.ws_host) return lands_ws(m);
    if (m.dst == v.ra_host) return lands_ra(m);
    if (m.dst == v.ca_host) return lands_ca(m);
    if (const UserState* u = user(m.dst)) return lands_user(*u, m);
    return true;
  }
};

}  // namespace

std::vector<Action> attacker_choices(TermArena& arena, const AttackerView& view,
                                     const std::vector<ChannelMsg>& in_flight,
                                     bool filtered) {
  std::vector<Action> out;
  const Knowledge& K = *view.knowledge;
  Guards g{arena, view};

  // 1. New bypass sessions, one per candidate claimed host. The baseline
  // variant never uses SSL, so a bypass there would only burn budget.
  if (view.bypass_left > 0 && view.variant != Variant::Ebia) {
    for (TermId h : view.user_hosts) {
      Action a;
      a.kind = Action::Kind::SslBypass;
      a.claimed_host = h;
      out.push_back(a);
    }
  }

  TermId att = view.attacker_host;

  // Replays and templates overlap; emit each distinct forgery once.
  std::vector<std::tuple<ChannelKind, uint32_t, TermId, TermId>> chosen;
  auto push_inject = [&](Channel ch, TermId payload, TermId dst) {
    auto key = std::make_tuple(ch.kind, ch.session, payload, dst);
    if (std::find(chosen.begin(), chosen.end(), key) != chosen.end()) return;
    chosen.push_back(key);
    out.push_back(inject(ch, payload, att, dst));
  };

  // 2a. Replays of previously observed messages.
  if (view.seen) {
    for (const ChannelMsg& m : *view.seen) {
      if (filtered && !g.lands(m)) continue;
      push_inject(m.channel, m.payload, m.dst);
    }
  }

  // 2b. Grammar templates, slots filled from the analyzed knowledge.
  std::vector<TermId> names = known_of_kind(K, arena, TermKind::Name, 8);
  std::vector<TermId> keys = known_of_kind(K, arena, TermKind::Key, 6);
  std::vector<TermId> hashes = known_of_kind(K, arena, TermKind::Hash, 6);

  // Known links in the directory's sense: fresh names the WS minted for
  // open registrations. Junk fillers all bounce the same way, so one
  // representative (the attacker's own name) stands in for the whole class.
  std::vector<TermId> live_links;
  if (view.ws_state) {
    for (const auto& [u, reg] : view.ws_state->regs)
      if (reg.link != kNoTerm && K.derivable(arena, reg.link)) live_links.push_back(reg.link);
  }

  if (view.variant == Variant::Ebia) {
    for (TermId h : view.user_hosts)
      if (!filtered || g.ws_msg1_ok(h))
        push_inject({ChannelKind::Public, 0}, arena.pair(arena.tag("msg1"), h),
                    view.ws_host);
    for (const auto& [h, us] : view.user_states) {
      if (filtered && us->phase != UserState::Phase::AwaitId) continue;
      for (TermId n : names)
        push_inject({ChannelKind::Public, 0}, tuple(arena, {arena.tag("msg4"), h, n}), h);
    }
  } else {
    // Full protocol: per-session SSL forgeries where the session key is known.
    for (const SslSessionInfo& s : *view.sessions) {
      if (!K.derivable(arena, s.key)) continue;
      Channel ch{ChannelKind::Ssl, s.id};
      TermId u = s.claimed_host;
      const WsReg* reg = g.reg(u);

      if (!filtered || g.ws_msg1_ok(u)) {
        TermId m1 = tuple(arena, {arena.tag("msg1"), u, view.ws_host});
        push_inject(ch, arena.sym_enc_term(m1, s.key), view.ws_host);
      }

      if (view.variant == Variant::ChatSrp) {
        // Only the code on file gets past the echo check; a guessed wrong
        // code is a provable bounce, so filtering keeps just the real one.
        std::vector<TermId> codes;
        if (filtered) {
          if (reg && reg->phase == WsReg::Phase::AwaitCode && K.derivable(arena, reg->otp))
            codes.push_back(reg->otp);
        } else {
          codes = names;
        }
        for (TermId c : codes) {
          TermId mc = tuple(arena, {arena.tag("msgcode"), u, view.ws_host, c});
          push_inject(ch, arena.sym_enc_term(mc, s.key), view.ws_host);
        }
      }

      std::vector<TermId> tickets = hashes;
      if (view.attacker_name != kNoTerm && K.contains(view.attacker_name))
        tickets.push_back(arena.hash_term(arena.pair(view.attacker_name, u)));
      // The redeem half only lands while its registration is open and only
      // under the link the WS minted; the ticket and wrap key ride along
      // unchecked until the authority sees them.
      std::vector<TermId> links;
      if (filtered) {
        if (reg && reg->phase == WsReg::Phase::AwaitAccess && !reg->have_redeem &&
            K.derivable(arena, reg->link))
          links.push_back(reg->link);
      } else {
        links = names;
      }
      for (TermId t : tickets)
        for (TermId l : links)
          for (TermId wk : keys) {
            TermId m5 = tuple(arena, {arena.tag("msg5"), u, view.ws_host, t, l, wk});
            push_inject(ch, arena.sym_enc_term(m5, s.key), view.ws_host);
          }
    }
  }

  // Plaintext link accesses: only a link of an open registration does
  // anything at the WS.
  if (filtered) {
    for (TermId l : live_links)
      if (g.ws_access_ok(l)) push_inject({ChannelKind::Public, 0}, l, view.ws_host);
  } else {
    for (TermId n : names) push_inject({ChannelKind::Public, 0}, n, view.ws_host);
  }

  // Emailed-link forgeries. Once the protected half pinned the link, only
  // that very link is accepted; before that any name is stored, and all
  // names outside the live links are interchangeable junk.
  for (const auto& [h, us] : view.user_states) {
    if (!filtered) {
      for (TermId n : names) push_inject({ChannelKind::Smtp, 0}, n, h);
      continue;
    }
    if (us->phase != UserState::Phase::AwaitRegData) continue;
    if (view.variant != Variant::Ebia) {
      if (us->have_smtp_half) continue;
      if (us->have_ssl_half) {
        if (K.derivable(arena, us->ssl_link))
          push_inject({ChannelKind::Smtp, 0}, us->ssl_link, h);
        continue;
      }
    }
    for (TermId l : live_links) push_inject({ChannelKind::Smtp, 0}, l, h);
    if (view.attacker_name != kNoTerm && K.contains(view.attacker_name))
      push_inject({ChannelKind::Smtp, 0}, view.attacker_name, h);
  }

  // 3. Actions on visible in-flight messages, in send order. Block reads
  // the payload before dropping it, and anything read stays replayable, so
  // a bare observation is never the only road to a state.
  for (const ChannelMsg& m : in_flight) {
    if (!m.channel.visible_to_attacker()) continue;
    Action d;
    d.kind = Action::Kind::Deliver;
    d.msg_index = m.send_index;
    out.push_back(d);
    Action b;
    b.kind = Action::Kind::Block;
    b.msg_index = m.send_index;
    out.push_back(b);
  }
  return out;
}

}  // namespace chatsrp
