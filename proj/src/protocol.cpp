#include "chatsrp/protocol.hpp"

namespace chatsrp {

const char* to_string(Role r) {
  switch (r) {
    case Role::User: return "user";
    case Role::Ws: return "ws";
    case Role::Ra: return "ra";
    case Role::Ca: return "ca";
    case Role::Attacker: return "attacker";
  }
  return "?";
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::ChatSrp: return "chatsrp";
    case Variant::ChatSrpNoSms: return "chatsrp-no-sms";
    case Variant::Ebia: return "ebia";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "chatsrp") return Variant::ChatSrp;
  if (s == "chatsrp-no-sms") return Variant::ChatSrpNoSms;
  if (s == "ebia") return Variant::Ebia;
  return std::nullopt;
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::UserRequestsRegistration: return "UserRequestsRegistration";
    case EventKind::WSSendsSMS: return "WSSendsSMS";
    case EventKind::UserProcessesSMS: return "UserProcessesSMS";
    case EventKind::WSSendsLink: return "WSSendsLink";
    case EventKind::RASendsTicket: return "RASendsTicket";
    case EventKind::UserReceivesRegistrationData: return "UserReceivesRegistrationData";
    case EventKind::UserReceivesId: return "UserReceivesId";
    case EventKind::CASendsId: return "CASendsId";
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(EventKind::CASendsId); ++i) {
    EventKind k = static_cast<EventKind>(i);
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

int event_arity(EventKind k) {
  switch (k) {
    case EventKind::UserRequestsRegistration: return 1;
    case EventKind::UserReceivesRegistrationData: return 3;
    default: return 2;
  }
}

const SslSessionInfo& SessionTable::negotiate(TermArena& arena, TermId claimed_host,
                                              bool bypass) {
  SslSessionInfo s;
  s.id = static_cast<uint32_t>(sessions_.size()) + 1;
  s.claimed_host = claimed_host;
  s.key = arena.key(bypass ? "k_bypass" : "k_uw", next_key_index_++);
  s.bypass = bypass;
  sessions_.push_back(s);
  return sessions_.back();
}

const SslSessionInfo* SessionTable::find(uint32_t id) const {
  if (id == 0 || id > sessions_.size()) return nullptr;
  return &sessions_[id - 1];
}

const SslSessionInfo& ssl_negotiate(StepCtx& ctx, TermId claimed_host, bool bypass) {
  return ctx.sessions.negotiate(ctx.arena, claimed_host, bypass);
}

namespace {

// Tuples are right-nested pairs: (a,b,c) = Pair(a, Pair(b, c)).
TermId tuple(TermArena& a, std::initializer_list<TermId> parts) {
  auto it = parts.end();
  TermId t = *--it;
  while (it != parts.begin()) t = a.pair(*--it, t);
  return t;
}

// Splits t into exactly n fields; empty result if t is too shallow.
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

Event ev(EventKind kind, TermId host, TermId x = kNoTerm, TermId y = kNoTerm) {
  return Event{kind, host, x, y, 0};
}

ChannelMsg msg(Channel ch, TermId payload, TermId src, TermId dst) {
  return ChannelMsg{ch, payload, src, dst, 0};
}

void drop(StepResult& r, std::string why) { r.notes.push_back(std::move(why)); }

// The registration-data message is split: an SSL-protected half carrying
// (ticket, link) and the plaintext link travelling by email. Completion is
// gated on both halves agreeing on the link.
StepResult user_complete_regdata(UserState& st, StepCtx& ctx, StepResult r) {
  if (!st.have_ssl_half || !st.have_smtp_half) {
    r.accepted = true;
    return r;
  }
  st.ticket = st.ssl_ticket;
  st.link = st.ssl_link;
  r.events.push_back(ev(EventKind::UserReceivesRegistrationData, st.host, st.ticket, st.link));
  const SslSessionInfo& s3 = ssl_negotiate(ctx, st.host);
  st.s3 = s3.id;
  st.wrap_key = ctx.fresh.make_key(ctx.arena, "k");
  TermId body = tuple(ctx.arena, {ctx.arena.tag("msg5"), st.host, ctx.ws_host, st.ticket,
                                  st.link, st.wrap_key});
  r.outbound.push_back(msg({ChannelKind::Ssl, s3.id}, sym_encrypt(ctx.arena, body, s3.key),
                           st.host, ctx.ws_host));
  // The link access itself is unprotected.
  r.outbound.push_back(msg({ChannelKind::Public, 0}, st.link, st.host, ctx.ws_host));
  st.phase = UserState::Phase::AwaitId;
  r.accepted = true;
  return r;
}

StepResult user_start(UserState& st, StepCtx& ctx) {
  StepResult r;
  if (st.phase != UserState::Phase::Idle) {
    drop(r, "user already started");
    return r;
  }
  const SslSessionInfo& s1 = ssl_negotiate(ctx, st.host);
  st.s1 = s1.id;
  r.events.push_back(ev(EventKind::UserRequestsRegistration, st.host));
  TermId body = tuple(ctx.arena, {ctx.arena.tag("msg1"), st.host, ctx.ws_host});
  r.outbound.push_back(
      msg({ChannelKind::Ssl, s1.id}, sym_encrypt(ctx.arena, body, s1.key), st.host, ctx.ws_host));
  st.phase = ctx.variant == Variant::ChatSrpNoSms ? UserState::Phase::AwaitRegData
                                                  : UserState::Phase::AwaitSms;
  r.accepted = true;
  return r;
}

}  // namespace

StepResult user_step(UserState& st, const StepInput& in, StepCtx& ctx) {
  if (std::holds_alternative<StartSignal>(in)) return user_start(st, ctx);
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  StepResult r;
  TermArena& A = ctx.arena;

  switch (m.channel.kind) {
    case ChannelKind::Sms: {
      if (ctx.variant != Variant::ChatSrp) {
        drop(r, "user: no SMS round in this variant");
        return r;
      }
      if (st.phase != UserState::Phase::AwaitSms) {
        drop(r, "user: unexpected SMS");
        return r;
      }
      auto f = untuple(A, m.payload, 2);
      if (f.empty() || f[0] != st.host) {
        drop(r, "user: SMS for someone else");
        return r;
      }
      st.code = f[1];
      r.events.push_back(ev(EventKind::UserProcessesSMS, st.host, st.code));
      const SslSessionInfo& s2 = ssl_negotiate(ctx, st.host);
      st.s2 = s2.id;
      TermId body = tuple(A, {A.tag("msgcode"), st.host, ctx.ws_host, st.code});
      r.outbound.push_back(
          msg({ChannelKind::Ssl, s2.id}, sym_encrypt(A, body, s2.key), st.host, ctx.ws_host));
      st.phase = UserState::Phase::AwaitRegData;
      r.accepted = true;
      return r;
    }

    case ChannelKind::Smtp: {
      if (st.phase != UserState::Phase::AwaitRegData) {
        drop(r, "user: unexpected email");
        return r;
      }
      if (A[m.payload].kind != TermKind::Name) {
        drop(r, "user: email payload is not a link");
        return r;
      }
      if (st.have_smtp_half) {
        drop(r, "user: duplicate emailed link");
        return r;
      }
      if (st.have_ssl_half && st.ssl_link != m.payload) {
        drop(r, "user: emailed link disagrees with protected half");
        return r;
      }
      st.smtp_link = m.payload;
      st.have_smtp_half = true;
      return user_complete_regdata(st, ctx, std::move(r));
    }

    case ChannelKind::Ssl: {
      const SslSessionInfo* sess = ctx.sessions.find(m.channel.session);
      if (!sess) {
        drop(r, "user: unknown SSL session");
        return r;
      }
      uint32_t regdata_session = ctx.variant == Variant::ChatSrpNoSms ? st.s1 : st.s2;
      if (st.phase == UserState::Phase::AwaitRegData && m.channel.session == regdata_session) {
        DecryptResult d = sym_decrypt(A, m.payload, sess->key);
        if (!d.ok()) {
          drop(r, "user: cannot decrypt on session");
          return r;
        }
        auto f = untuple(A, d.term, 5);
        if (f.size() != 5 || !is_tag(A, f[0], "msg4") || f[1] != ctx.ws_host ||
            f[2] != st.host) {
          drop(r, "user: malformed registration data");
          return r;
        }
        if (st.have_ssl_half) {
          drop(r, "user: duplicate registration data");
          return r;
        }
        if (st.have_smtp_half && st.smtp_link != f[4]) {
          drop(r, "user: protected half disagrees with emailed link");
          return r;
        }
        st.ssl_ticket = f[3];
        st.ssl_link = f[4];
        st.have_ssl_half = true;
        return user_complete_regdata(st, ctx, std::move(r));
      }
      if (st.phase == UserState::Phase::AwaitId && m.channel.session == st.s3) {
        DecryptResult d = sym_decrypt(A, m.payload, sess->key);
        if (!d.ok()) {
          drop(r, "user: cannot decrypt on session");
          return r;
        }
        auto f = untuple(A, d.term, 4);
        if (f.size() != 4 || !is_tag(A, f[0], "msg10") || f[1] != ctx.ws_host ||
            f[2] != st.host) {
          drop(r, "user: malformed credential message");
          return r;
        }
        DecryptResult idp = id_decrypt(A, f[3], st.wrap_key);
        if (!idp.ok()) {
          drop(r, "user: credential not wrapped under my key");
          return r;
        }
        st.id = idp.term;
        r.events.push_back(ev(EventKind::UserReceivesId, st.host, st.id));
        st.phase = UserState::Phase::Done;
        r.accepted = true;
        return r;
      }
      drop(r, "user: SSL message out of phase");
      return r;
    }

    case ChannelKind::Public:
      drop(r, "user: ignores public traffic");
      return r;
  }
  return r;
}

namespace {

StepResult ws_fire_redemption(WsState& st, TermId u, WsReg& reg, StepCtx& ctx, StepResult r) {
  if (!reg.have_redeem || !reg.have_access) {
    r.accepted = true;
    return r;
  }
  TermArena& A = ctx.arena;
  TermId body = tuple(A, {A.tag("msg6"), st.host, ctx.ra_host, u, reg.redeem_ticket,
                          reg.redeem_key});
  r.outbound.push_back(
      msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_wr), st.host, ctx.ra_host));
  reg.phase = WsReg::Phase::AwaitEid;
  r.accepted = true;
  return r;
}

StepResult ws_ssl(WsState& st, const ChannelMsg& m, StepCtx& ctx) {
  StepResult r;
  TermArena& A = ctx.arena;
  const SslSessionInfo* sess = ctx.sessions.find(m.channel.session);
  if (!sess) {
    drop(r, "ws: unknown SSL session");
    return r;
  }
  DecryptResult d = sym_decrypt(A, m.payload, sess->key);
  if (!d.ok()) {
    drop(r, "ws: cannot decrypt on session");
    return r;
  }
  // Dispatch on the tag inside the ciphertext; the session's claimed host
  // must match the host named in the message.
  auto head = untuple(A, d.term, 2);
  if (head.empty() || A[head[0]].kind != TermKind::Tag) {
    drop(r, "ws: untagged SSL payload");
    return r;
  }
  const std::string& tag = A[head[0]].label;

  if (tag == "msg1") {
    auto f = untuple(A, d.term, 3);
    if (f.size() != 3 || f[1] != sess->claimed_host || f[2] != st.host) {
      drop(r, "ws: malformed registration request");
      return r;
    }
    TermId u = f[1];
    auto it = st.regs.find(u);
    if (it != st.regs.end() && it->second.phase != WsReg::Phase::Done) {
      drop(r, "ws: registration already in progress");
      return r;
    }
    if (!st.phones.count(u)) {
      drop(r, "ws: no verified phone for host");
      return r;
    }
    WsReg reg;
    reg.s1 = m.channel.session;
    if (ctx.variant == Variant::ChatSrp) {
      OtpCode otp = ctx.prng.next_otp();
      // The digits are display flavour; the freshness index keeps two draws
      // of the same code distinct terms, as a code is never reused.
      reg.otp = A.name("otp:" + otp.digits(), ctx.fresh.next["otp"]++);
      reg.phase = WsReg::Phase::AwaitCode;
      st.regs[u] = reg;
      r.events.push_back(ev(EventKind::WSSendsSMS, u, reg.otp));
      r.outbound.push_back(msg({ChannelKind::Sms, 0}, A.pair(u, reg.otp), st.host, u));
    } else {
      reg.phase = WsReg::Phase::AwaitTicket;
      st.regs[u] = reg;
      TermId body = tuple(A, {A.tag("msg2"), st.host, ctx.ra_host, u});
      r.outbound.push_back(
          msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_wr), st.host, ctx.ra_host));
    }
    r.accepted = true;
    return r;
  }

  if (tag == "msgcode") {
    if (ctx.variant != Variant::ChatSrp) {
      drop(r, "ws: no code round in this variant");
      return r;
    }
    auto f = untuple(A, d.term, 4);
    if (f.size() != 4 || f[1] != sess->claimed_host || f[2] != st.host) {
      drop(r, "ws: malformed code echo");
      return r;
    }
    TermId u = f[1];
    auto it = st.regs.find(u);
    if (it == st.regs.end() || it->second.phase != WsReg::Phase::AwaitCode) {
      drop(r, "ws: no registration awaiting a code");
      return r;
    }
    if (f[3] != it->second.otp) {
      drop(r, "ws: code mismatch");
      return r;
    }
    it->second.s2 = m.channel.session;
    it->second.phase = WsReg::Phase::AwaitTicket;
    TermId body = tuple(A, {A.tag("msg2"), st.host, ctx.ra_host, u});
    r.outbound.push_back(
        msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_wr), st.host, ctx.ra_host));
    r.accepted = true;
    return r;
  }

  if (tag == "msg5") {
    auto f = untuple(A, d.term, 6);
    if (f.size() != 6 || f[1] != sess->claimed_host || f[2] != st.host) {
      drop(r, "ws: malformed redemption");
      return r;
    }
    TermId u = f[1];
    auto it = st.regs.find(u);
    if (it == st.regs.end() || it->second.phase != WsReg::Phase::AwaitAccess) {
      drop(r, "ws: no registration awaiting redemption");
      return r;
    }
    WsReg& reg = it->second;
    if (f[4] != reg.link) {
      drop(r, "ws: redemption names a different link");
      return r;
    }
    if (reg.have_redeem) {
      drop(r, "ws: duplicate redemption half");
      return r;
    }
    reg.redeem_ticket = f[3];
    reg.redeem_key = f[5];
    reg.s3 = m.channel.session;
    reg.have_redeem = true;
    return ws_fire_redemption(st, u, reg, ctx, std::move(r));
  }

  drop(r, "ws: unexpected SSL tag " + tag);
  return r;
}

StepResult ws_public(WsState& st, const ChannelMsg& m, StepCtx& ctx) {
  StepResult r;
  TermArena& A = ctx.arena;
  DecryptResult d = sym_decrypt(A, m.payload, st.k_wr);
  if (d.ok()) {
    auto head = untuple(A, d.term, 2);
    if (head.empty() || A[head[0]].kind != TermKind::Tag) {
      drop(r, "ws: untagged authority message");
      return r;
    }
    const std::string& tag = A[head[0]].label;

    if (tag == "msg3") {
      auto f = untuple(A, d.term, 5);
      if (f.size() != 5 || f[1] != ctx.ra_host || f[2] != st.host) {
        drop(r, "ws: malformed ticket delivery");
        return r;
      }
      TermId u = f[3], ticket = f[4];
      auto it = st.regs.find(u);
      if (it == st.regs.end() || it->second.phase != WsReg::Phase::AwaitTicket) {
        drop(r, "ws: no registration awaiting a ticket");
        return r;
      }
      WsReg& reg = it->second;
      reg.link = ctx.fresh.make_name(A, "link");
      r.events.push_back(ev(EventKind::WSSendsLink, u, reg.link));
      uint32_t to_session = ctx.variant == Variant::ChatSrpNoSms ? reg.s1 : reg.s2;
      const SslSessionInfo* us = ctx.sessions.find(to_session);
      TermId body = tuple(A, {A.tag("msg4"), st.host, u, ticket, reg.link});
      r.outbound.push_back(msg({ChannelKind::Ssl, to_session},
                               sym_encrypt(A, body, us->key), st.host, u));
      r.outbound.push_back(msg({ChannelKind::Smtp, 0}, reg.link, st.host, u));
      reg.phase = WsReg::Phase::AwaitAccess;
      r.accepted = true;
      return r;
    }

    if (tag == "msg9") {
      auto f = untuple(A, d.term, 5);
      if (f.size() != 5 || f[1] != ctx.ra_host || f[2] != st.host) {
        drop(r, "ws: malformed credential forward");
        return r;
      }
      TermId u = f[3], eid = f[4];
      auto it = st.regs.find(u);
      if (it == st.regs.end() || it->second.phase != WsReg::Phase::AwaitEid) {
        drop(r, "ws: no registration awaiting a credential");
        return r;
      }
      WsReg& reg = it->second;
      const SslSessionInfo* us = ctx.sessions.find(reg.s3);
      TermId body = tuple(A, {A.tag("msg10"), st.host, u, eid});
      r.outbound.push_back(
          msg({ChannelKind::Ssl, reg.s3}, sym_encrypt(A, body, us->key), st.host, u));
      reg.phase = WsReg::Phase::Done;
      r.accepted = true;
      return r;
    }

    drop(r, "ws: unexpected authority tag " + tag);
    return r;
  }

  // Not under the authority key: a bare name is a link access.
  if (A[m.payload].kind == TermKind::Name) {
    for (auto& [u, reg] : st.regs) {
      if (reg.link == m.payload && reg.phase == WsReg::Phase::AwaitAccess) {
        if (reg.have_access) {
          drop(r, "ws: duplicate link access");
          return r;
        }
        reg.have_access = true;
        return ws_fire_redemption(st, u, reg, ctx, std::move(r));
      }
    }
    drop(r, "ws: link access matches no open registration");
    return r;
  }
  drop(r, "ws: undecipherable public message");
  return r;
}

}  // namespace

StepResult ws_step(WsState& st, const StepInput& in, StepCtx& ctx) {
  StepResult r;
  if (!std::holds_alternative<ChannelMsg>(in)) {
    drop(r, "ws: nothing to start");
    return r;
  }
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  switch (m.channel.kind) {
    case ChannelKind::Ssl: return ws_ssl(st, m, ctx);
    case ChannelKind::Public: return ws_public(st, m, ctx);
    default: drop(r, "ws: unexpected channel"); return r;
  }
}

StepResult ra_step(RaState& st, const StepInput& in, StepCtx& ctx) {
  StepResult r;
  if (!std::holds_alternative<ChannelMsg>(in)) {
    drop(r, "ra: nothing to start");
    return r;
  }
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  TermArena& A = ctx.arena;
  if (m.channel.kind != ChannelKind::Public) {
    drop(r, "ra: unexpected channel");
    return r;
  }

  if (DecryptResult d = sym_decrypt(A, m.payload, st.k_wr); d.ok()) {
    auto head = untuple(A, d.term, 2);
    if (head.empty() || A[head[0]].kind != TermKind::Tag) {
      drop(r, "ra: untagged message");
      return r;
    }
    const std::string& tag = A[head[0]].label;

    if (tag == "msg2") {
      auto f = untuple(A, d.term, 4);
      if (f.size() != 4 || f[1] != ctx.ws_host || f[2] != st.host) {
        drop(r, "ra: malformed ticket request");
        return r;
      }
      TermId u = f[3];
      if (st.pending.has(u)) {
        drop(r, "ra: pending request exists for host");
        return r;
      }
      Nonce nonce = ctx.prng.next_nonce();
      TermId nonce_term = A.name("nonce:" + nonce.hex(), ctx.fresh.next["nonce"]++);
      TicketResult t = make_ticket(A, st.pending, nonce_term, u);
      r.events.push_back(ev(EventKind::RASendsTicket, u, t.ticket));
      TermId body = tuple(A, {A.tag("msg3"), st.host, ctx.ws_host, u, t.ticket});
      r.outbound.push_back(
          msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_wr), st.host, ctx.ws_host));
      r.accepted = true;
      return r;
    }

    if (tag == "msg6") {
      auto f = untuple(A, d.term, 6);
      if (f.size() != 6 || f[1] != ctx.ws_host || f[2] != st.host) {
        drop(r, "ra: malformed redemption");
        return r;
      }
      TermId u = f[3], ticket = f[4], wrap_key = f[5];
      const PendingTicket* p = st.pending.find(u);
      if (!p) {
        drop(r, "ra: no pending ticket for host (replay or unknown)");
        return r;
      }
      if (p->ticket != ticket) {
        drop(r, "ra: ticket mismatch");
        return r;
      }
      st.pending.erase(u);  // single use
      st.flows[u] = RaFlow{RaFlow::Phase::AwaitEid};
      TermId body = tuple(A, {A.tag("msg7"), st.host, ctx.ca_host, u, wrap_key});
      r.outbound.push_back(
          msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_rc), st.host, ctx.ca_host));
      r.accepted = true;
      return r;
    }

    drop(r, "ra: unexpected tag " + tag);
    return r;
  }

  if (DecryptResult d = sym_decrypt(A, m.payload, st.k_rc); d.ok()) {
    auto f = untuple(A, d.term, 5);
    if (f.size() != 5 || !is_tag(A, f[0], "msg8") || f[1] != ctx.ca_host || f[2] != st.host) {
      drop(r, "ra: malformed credential return");
      return r;
    }
    TermId u = f[3], eid = f[4];
    auto it = st.flows.find(u);
    if (it == st.flows.end() || it->second.phase != RaFlow::Phase::AwaitEid) {
      drop(r, "ra: no flow awaiting a credential");
      return r;
    }
    it->second.phase = RaFlow::Phase::Done;
    TermId body = tuple(A, {A.tag("msg9"), st.host, ctx.ws_host, u, eid});
    r.outbound.push_back(
        msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_wr), st.host, ctx.ws_host));
    r.accepted = true;
    return r;
  }

  drop(r, "ra: undecipherable message");
  return r;
}

StepResult ca_step(CaState& st, const StepInput& in, StepCtx& ctx) {
  StepResult r;
  if (!std::holds_alternative<ChannelMsg>(in)) {
    drop(r, "ca: nothing to start");
    return r;
  }
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  TermArena& A = ctx.arena;
  if (m.channel.kind != ChannelKind::Public) {
    drop(r, "ca: unexpected channel");
    return r;
  }
  DecryptResult d = sym_decrypt(A, m.payload, st.k_rc);
  if (!d.ok()) {
    drop(r, "ca: undecipherable message");
    return r;
  }
  auto f = untuple(A, d.term, 5);
  if (f.size() != 5 || !is_tag(A, f[0], "msg7") || f[1] != ctx.ra_host || f[2] != st.host) {
    drop(r, "ca: malformed issuance request");
    return r;
  }
  TermId u = f[3], wrap_key = f[4];
  if (A[wrap_key].kind != TermKind::Key) {
    drop(r, "ca: wrap key is not a key");
    return r;
  }
  TermId id = ctx.fresh.make_name(A, "id");
  ++st.issued;
  TermId eid = id_encrypt(A, id, wrap_key);
  r.events.push_back(ev(EventKind::CASendsId, u, id));
  TermId body = tuple(A, {A.tag("msg8"), st.host, ctx.ra_host, u, eid});
  r.outbound.push_back(
      msg({ChannelKind::Public, 0}, sym_encrypt(A, body, st.k_rc), st.host, ctx.ra_host));
  r.accepted = true;
  return r;
}

// ---- baseline variant ----------------------------------------------------

StepResult ebia_step(UserState& st, const StepInput& in, StepCtx& ctx) {
  StepResult r;
  TermArena& A = ctx.arena;
  if (std::holds_alternative<StartSignal>(in)) {
    if (st.phase != UserState::Phase::Idle) {
      drop(r, "user: already started");
      return r;
    }
    r.events.push_back(ev(EventKind::UserRequestsRegistration, st.host));
    r.outbound.push_back(msg({ChannelKind::Public, 0},
                             A.pair(A.tag("msg1"), st.host), st.host, ctx.ws_host));
    st.phase = UserState::Phase::AwaitRegData;
    r.accepted = true;
    return r;
  }
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  if (m.channel.kind == ChannelKind::Smtp) {
    if (st.phase != UserState::Phase::AwaitRegData) {
      drop(r, "user: unexpected email");
      return r;
    }
    if (A[m.payload].kind != TermKind::Name) {
      drop(r, "user: email payload is not a link");
      return r;
    }
    st.link = m.payload;
    // No ticket in this flow; the placeholder keeps the event ternary.
    r.events.push_back(
        ev(EventKind::UserReceivesRegistrationData, st.host, A.tag("none"), st.link));
    r.outbound.push_back(msg({ChannelKind::Public, 0}, st.link, st.host, ctx.ws_host));
    st.phase = UserState::Phase::AwaitId;
    r.accepted = true;
    return r;
  }
  if (m.channel.kind == ChannelKind::Public) {
    if (st.phase != UserState::Phase::AwaitId) {
      drop(r, "user: unexpected confirmation");
      return r;
    }
    auto f = untuple(A, m.payload, 3);
    if (f.size() != 3 || !is_tag(A, f[0], "msg4") || f[1] != st.host) {
      drop(r, "user: malformed confirmation");
      return r;
    }
    st.id = f[2];
    r.events.push_back(ev(EventKind::UserReceivesId, st.host, st.id));
    st.phase = UserState::Phase::Done;
    r.accepted = true;
    return r;
  }
  drop(r, "user: unexpected channel");
  return r;
}

StepResult ebia_step(WsState& st, const StepInput& in, StepCtx& ctx) {
  StepResult r;
  TermArena& A = ctx.arena;
  if (!std::holds_alternative<ChannelMsg>(in)) {
    drop(r, "ws: nothing to start");
    return r;
  }
  const ChannelMsg& m = std::get<ChannelMsg>(in);
  if (m.channel.kind != ChannelKind::Public) {
    drop(r, "ws: unexpected channel");
    return r;
  }

  if (A[m.payload].kind == TermKind::Pair) {
    auto f = untuple(A, m.payload, 2);
    if (f.size() == 2 && is_tag(A, f[0], "msg1") && A[f[1]].kind == TermKind::Host) {
      TermId u = f[1];
      auto it = st.regs.find(u);
      if (it != st.regs.end() && it->second.phase != WsReg::Phase::Done) {
        drop(r, "ws: registration already in progress");
        return r;
      }
      WsReg reg;
      reg.phase = WsReg::Phase::AwaitAccess;
      reg.link = ctx.fresh.make_name(A, "link");
      st.regs[u] = reg;
      r.events.push_back(ev(EventKind::WSSendsLink, u, reg.link));
      r.outbound.push_back(msg({ChannelKind::Smtp, 0}, reg.link, st.host, u));
      r.accepted = true;
      return r;
    }
    // Fall through to the confirmation shape below? Confirmations are sent,
    // never received, by the WS; anything else is noise.
    drop(r, "ws: malformed request");
    return r;
  }

  if (A[m.payload].kind == TermKind::Name) {
    for (auto& [u, reg] : st.regs) {
      if (reg.link == m.payload && reg.phase == WsReg::Phase::AwaitAccess) {
        reg.phase = WsReg::Phase::Done;  // activation links are single use
        TermId id = ctx.fresh.make_name(A, "id");
        r.events.push_back(ev(EventKind::CASendsId, u, id));
        r.outbound.push_back(msg({ChannelKind::Public, 0},
                                 tuple(A, {A.tag("msg4"), u, id}), st.host, u));
        r.accepted = true;
        return r;
      }
    }
    drop(r, "ws: link access matches no open registration");
    return r;
  }
  drop(r, "ws: undecipherable public message");
  return r;
}

}  // namespace chatsrp
