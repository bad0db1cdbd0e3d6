#include "chatsrp/system.hpp"

#include <algorithm>

namespace chatsrp {

System::System(const Fixture& fixture, TermArena& arena)
    : arena_(&arena),
      variant_(fixture.variant),
      mode_(fixture.attacker),
      prng_(fixture.seed, fixture.effective_param_a()),
      starts_left_(fixture.max_user_starts),
      bypass_left_(fixture.max_bypass) {
  ws_host_ = arena.host("ws");
  if (variant_ != Variant::Ebia) {
    ra_host_ = arena.host("ra");
    ca_host_ = arena.host("ca");
  }

  for (const FixtureUser& u : fixture.users) {
    if (u.label == "ws" || u.label == "ra" || u.label == "ca" || u.label == "eve")
      throw ConfigError("user label '" + u.label + "' is reserved");
    Principal p;
    p.role = Role::User;
    p.label = u.label;
    p.host = arena.host(u.label);
    if (by_host_.count(p.host)) throw ConfigError("duplicate user label '" + u.label + "'");
    p.user.host = p.host;
    by_host_[p.host] = static_cast<uint32_t>(principals_.size());
    principals_.push_back(std::move(p));
  }

  Principal ws;
  ws.role = Role::Ws;
  ws.label = "ws";
  ws.host = ws_host_;
  ws.ws.host = ws_host_;
  ws.ws.k_wr = arena.key("k_wr");
  for (const FixtureUser& u : fixture.users)
    if (u.in_directory) ws.ws.phones[arena.host(u.label)] = u.phone;
  by_host_[ws.host] = static_cast<uint32_t>(principals_.size());
  principals_.push_back(std::move(ws));

  if (variant_ != Variant::Ebia) {
    Principal ra;
    ra.role = Role::Ra;
    ra.label = "ra";
    ra.host = ra_host_;
    ra.ra.host = ra_host_;
    ra.ra.k_wr = arena.key("k_wr");
    ra.ra.k_rc = arena.key("k_rc");
    by_host_[ra.host] = static_cast<uint32_t>(principals_.size());
    principals_.push_back(std::move(ra));

    Principal ca;
    ca.role = Role::Ca;
    ca.label = "ca";
    ca.host = ca_host_;
    ca.ca.host = ca_host_;
    ca.ca.k_rc = arena.key("k_rc");
    by_host_[ca.host] = static_cast<uint32_t>(principals_.size());
    principals_.push_back(std::move(ca));
  }

  if (mode_ != AttackerMode::Off) {
    Principal att;
    att.role = Role::Attacker;
    att.label = "eve";
    att.host = arena.host("eve");
    attacker_host_ = att.host;
    by_host_[att.host] = static_cast<uint32_t>(principals_.size());
    principals_.push_back(std::move(att));

    attacker_name_ = arena.name("n_att");
    attacker_key_ = arena.key("k_att");
    for (const char* t : {"msg1", "msg2", "msg3", "msg4", "msg5", "msg6", "msg7", "msg8",
                          "msg9", "msg10", "msgcode", "none"})
      knowledge_.add(arena, arena.tag(t));
    for (const Principal& p : principals_) knowledge_.add(arena, p.host);
    knowledge_.add(arena, attacker_name_);
    knowledge_.add(arena, attacker_key_);
    for (const std::string& s : fixture.extra_knowledge) knowledge_.add(arena, arena.parse(s));
  }
  arena_watermark_ = static_cast<TermId>(arena.size());
}

const Principal* System::by_host(TermId host) const {
  auto it = by_host_.find(host);
  return it == by_host_.end() ? nullptr : &principals_[it->second];
}

const Principal* System::by_label(const std::string& label) const {
  for (const Principal& p : principals_)
    if (p.label == label) return &p;
  return nullptr;
}

Principal* System::find_principal(TermId host) {
  auto it = by_host_.find(host);
  return it == by_host_.end() ? nullptr : &principals_[it->second];
}

StepResult System::run_step(Principal& p, const StepInput& in) {
  StepCtx ctx{*arena_, prng_,  fresh_,  sessions_, variant_,
              ws_host_, ra_host_, ca_host_};
  switch (p.role) {
    case Role::User:
      return variant_ == Variant::Ebia ? ebia_step(p.user, in, ctx) : user_step(p.user, in, ctx);
    case Role::Ws:
      return variant_ == Variant::Ebia ? ebia_step(p.ws, in, ctx) : ws_step(p.ws, in, ctx);
    case Role::Ra:
      return ra_step(p.ra, in, ctx);
    case Role::Ca:
      return ca_step(p.ca, in, ctx);
    case Role::Attacker: {
      StepResult r;
      r.notes.push_back("attacker endpoint absorbs the message");
      return r;
    }
  }
  return {};
}

bool System::sms_consumable(const ChannelMsg& m) {
  // Mirrors the user-step accept condition: right variant, right phase, and
  // the payload names the receiving host.
  if (variant_ != Variant::ChatSrp) return false;
  Principal* p = find_principal(m.dst);
  if (!p || p->role != Role::User) return false;
  if (p->user.phase != UserState::Phase::AwaitSms) return false;
  const Term& t = (*arena_)[m.payload];
  return t.kind == TermKind::Pair && t.left == p->host;
}

void System::record(const Action& a, const char* actor, const std::optional<ChannelMsg>& m,
                    const StepResult* r, bool knowledge_changed) {
  if (!recording_) return;
  TraceStep s;
  s.index = static_cast<uint32_t>(trace_.size());
  s.actor = actor;
  s.action = a;
  s.msg = m;
  if (r) {
    s.events = r->events;
    s.notes = r->notes;
  }
  bool attacker_step = std::string_view(actor) == "attacker";
  if (mode_ != AttackerMode::Off && (knowledge_changed || attacker_step)) {
    for (TermId t : knowledge_.analyzed()) s.knowledge.push_back(arena_->sexpr(t));
    // Lexicographic, not arena order: snapshots must not depend on what else
    // the process happened to intern first.
    std::sort(s.knowledge.begin(), s.knowledge.end());
  }
  trace_.push_back(std::move(s));
}

void System::commit(StepResult& r, const Action& a, const char* actor,
                    const std::optional<ChannelMsg>& m, ApplyOutcome& out) {
  for (ChannelMsg& o : r.outbound) {
    o.send_index = next_send_index_++;
    in_flight_.push_back(o);
  }
  for (Event& e : r.events) {
    e.seq = next_event_seq_++;
    events_.push_back(e);
  }
  out.new_events = r.events.size();
  out.effective = out.effective || r.accepted || !r.events.empty() || !r.outbound.empty() ||
                  out.knowledge_grew;
  record(a, actor, m, &r, out.knowledge_grew);
}

ApplyOutcome System::apply(const Action& a) {
  ApplyOutcome out;
  auto invalid = [&](std::string why) {
    out.valid = false;
    out.error = std::move(why);
    return out;
  };
  auto find_msg = [&](uint64_t idx) {
    return std::find_if(in_flight_.begin(), in_flight_.end(),
                        [idx](const ChannelMsg& m) { return m.send_index == idx; });
  };

  switch (a.kind) {
    case Action::Kind::StartUser: {
      const Principal* cp = by_label(a.user);
      if (!cp || cp->role != Role::User) return invalid("no user named '" + a.user + "'");
      if (starts_left_ <= 0) return invalid("user-start budget exhausted");
      Principal& p = principals_[static_cast<size_t>(cp - principals_.data())];
      StepResult r = run_step(p, StartSignal{});
      if (r.accepted) --starts_left_;
      out.valid = true;
      commit(r, a, "scheduler", std::nullopt, out);
      return out;
    }

    case Action::Kind::Deliver: {
      auto it = find_msg(a.msg_index);
      if (it == in_flight_.end()) return invalid("no in-flight message with that index");
      ChannelMsg m = *it;
      in_flight_.erase(it);
      bool visible = m.channel.visible_to_attacker();
      const char* actor = (mode_ == AttackerMode::Active && visible) ? "attacker" : "scheduler";
      if (visible && mode_ != AttackerMode::Off) {
        out.knowledge_grew = knowledge_.add(*arena_, m.payload);
        seen_.push_back(m);
      }
      out.valid = true;
      out.effective = true;  // the queue shrank
      StepResult r;
      Principal* p = find_principal(m.dst);
      if (p)
        r = run_step(*p, m);
      else
        r.notes.push_back("no principal at destination");
      commit(r, a, actor, m, out);
      return out;
    }

    case Action::Kind::Block: {
      if (mode_ != AttackerMode::Active) return invalid("block requires an active attacker");
      auto it = find_msg(a.msg_index);
      if (it == in_flight_.end()) return invalid("no in-flight message with that index");
      if (!it->channel.visible_to_attacker()) return invalid("message is not attacker-visible");
      ChannelMsg m = *it;
      in_flight_.erase(it);
      out.knowledge_grew = knowledge_.add(*arena_, m.payload);
      seen_.push_back(m);
      out.valid = true;
      out.effective = true;
      record(a, "attacker", m, nullptr, out.knowledge_grew);
      return out;
    }

    case Action::Kind::Observe: {
      if (mode_ != AttackerMode::Active) return invalid("observe requires an active attacker");
      auto it = find_msg(a.msg_index);
      if (it == in_flight_.end()) return invalid("no in-flight message with that index");
      if (!it->channel.visible_to_attacker()) return invalid("message is not attacker-visible");
      out.knowledge_grew = knowledge_.add(*arena_, it->payload);
      seen_.push_back(*it);
      out.valid = true;
      out.effective = out.knowledge_grew;
      record(a, "attacker", *it, nullptr, out.knowledge_grew);
      return out;
    }

    case Action::Kind::Inject: {
      if (mode_ != AttackerMode::Active) return invalid("inject requires an active attacker");
      if (!a.forged.channel.visible_to_attacker())
        return invalid("channel is not attacker-injectable");
      if (!knowledge_.derivable(*arena_, a.forged.payload))
        return invalid("payload is not derivable from attacker knowledge");
      ChannelMsg m = a.forged;
      m.src = attacker_host_;
      m.send_index = next_send_index_++;
      out.valid = true;
      // Delivered atomically: enqueue-then-deliver collapses to one step
      // because attacker knowledge only grows.
      StepResult r;
      Principal* p = find_principal(m.dst);
      if (p)
        r = run_step(*p, m);
      else
        r.notes.push_back("no principal at destination");
      commit(r, a, "attacker", m, out);
      // A forgery the receiver fully ignored leaves no message behind;
      // reclaim its index so converging states keep identical numbering.
      if (!out.effective) --next_send_index_;
      return out;
    }

    case Action::Kind::SslBypass: {
      if (mode_ != AttackerMode::Active) return invalid("bypass requires an active attacker");
      if (bypass_left_ <= 0) return invalid("bypass budget exhausted");
      if (a.claimed_host == kNoTerm) return invalid("bypass needs a claimed host");
      --bypass_left_;
      const SslSessionInfo& s = sessions_.negotiate(*arena_, a.claimed_host, true);
      out.knowledge_grew = knowledge_.add(*arena_, s.key);
      out.valid = true;
      out.effective = true;
      record(a, "attacker", std::nullopt, nullptr, out.knowledge_grew);
      return out;
    }
  }
  return invalid("unreachable");
}

std::vector<Action> System::enabled_actions() {
  std::vector<Action> out;
  if (mode_ == AttackerMode::Active) {
    out = attacker_choices(*arena_, attacker_view(), in_flight_);
    for (const ChannelMsg& m : in_flight_) {
      if (m.channel.visible_to_attacker()) continue;
      if (!sms_consumable(m)) continue;
      Action d;
      d.kind = Action::Kind::Deliver;
      d.msg_index = m.send_index;
      out.push_back(d);
    }
  } else {
    for (const ChannelMsg& m : in_flight_) {
      if (m.channel.kind == ChannelKind::Sms && !sms_consumable(m)) continue;
      Action d;
      d.kind = Action::Kind::Deliver;
      d.msg_index = m.send_index;
      out.push_back(d);
    }
  }
  if (starts_left_ > 0) {
    for (const Principal& p : principals_) {
      if (p.role != Role::User || p.user.phase != UserState::Phase::Idle) continue;
      Action s;
      s.kind = Action::Kind::StartUser;
      s.user = p.label;
      out.push_back(s);
    }
  }
  return out;
}

bool System::quiescent() {
  for (const ChannelMsg& m : in_flight_)
    if (m.channel.kind != ChannelKind::Sms || sms_consumable(m)) return false;
  if (starts_left_ > 0)
    for (const Principal& p : principals_)
      if (p.role == Role::User && p.user.phase == UserState::Phase::Idle) return false;
  return true;
}

AttackerView System::attacker_view() const {
  AttackerView v;
  v.arena = arena_;
  v.knowledge = &knowledge_;
  v.sessions = &sessions_.all();
  for (const Principal& p : principals_) {
    switch (p.role) {
      case Role::User:
        v.user_hosts.push_back(p.host);
        v.user_states.emplace_back(p.host, &p.user);
        break;
      case Role::Ws: v.ws_state = &p.ws; break;
      case Role::Ra: v.ra_state = &p.ra; break;
      default: break;
    }
  }
  v.ws_host = ws_host_;
  v.ra_host = ra_host_;
  v.ca_host = ca_host_;
  v.attacker_host = attacker_host_;
  v.attacker_name = attacker_name_;
  v.attacker_key = attacker_key_;
  v.variant = variant_;
  v.seen = &seen_;
  v.bypass_left = bypass_left_;
  return v;
}

namespace {

struct Fold {
  uint64_t h1 = 0xcbf29ce484222325ull;
  uint64_t h2 = 0x9e3779b97f4a7c15ull;

  void u64(uint64_t v) {
    h1 = (h1 ^ v) * 0x100000001b3ull;
    h2 = (h2 ^ (v + 0x9e3779b97f4a7c15ull + (h2 << 6) + (h2 >> 2)));
  }
  void str(const std::string& s) {
    u64(s.size());
    for (char c : s) u64(static_cast<uint8_t>(c));
  }
};

uint64_t str_hash(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) h = (h ^ static_cast<uint8_t>(c)) * 0x100000001b3ull;
  return h;
}

// Buffers reused across digest calls. The explorer digests one successor per
// applied action, so per-call allocation here would dominate the search;
// everything below is cleared (or epoch-invalidated) instead of freed.
struct DigestScratch {
  uint64_t epoch = 0;
  struct Slot {
    uint64_t stamp = 0;  // slot is live iff stamp == current epoch
    uint64_t token = 0;
  };
  std::vector<Slot> assigned;                       // dense, indexed by TermId
  std::vector<std::pair<uint64_t, uint64_t>> fams;  // family hash -> next index
  std::vector<std::pair<TermId, uint64_t>> locals;  // per-element numbering
  std::vector<uint64_t> keys;                       // pass-one sort keys, flat
  struct Span {
    size_t off, len;
    uint32_t idx;
  };
  std::vector<Span> spans;
  std::vector<uint64_t> toks;
  std::vector<uint32_t> sess_rank;
  std::vector<const SslSessionInfo*> sess_order;
  std::vector<ChannelMsg> seen_set;
};

DigestScratch& digest_scratch() {
  static thread_local DigestScratch ds;  // parallel explorers digest in their own threads
  return ds;
}

// Canonical renaming of run-minted atoms for the state digest. The digest is
// the explorer's visited-set key, so it decides which states count as "the
// same"; every quotient below is justified by what the step functions and
// the verifier can actually observe.
//
//   * A Name or Key interned after construction is numbered by first
//     appearance within its label family (the label up to ':', so the
//     PRNG-flavoured part of a code or nonce does not distinguish states).
//     Handlers compare such atoms only for equality, and property patterns
//     pin at most the unflavoured label, which renaming preserves.
//   * Tags and hosts keep their labels: those carry meaning.
//   * Terms older than the watermark fold by id; the construction-time
//     prefix is identical across runs of the same fixture shape.
struct Canon {
  const TermArena& A;
  TermId watermark;
  DigestScratch& ds;

  Canon(const TermArena& a, TermId wm, DigestScratch& s) : A(a), watermark(wm), ds(s) {
    ++ds.epoch;
    if (ds.assigned.size() < A.size()) ds.assigned.resize(A.size());
    ds.fams.clear();
  }

  uint64_t family_of(const Term& t) const {
    std::string_view label = t.label;
    if (size_t colon = label.find(':'); colon != std::string_view::npos)
      label = label.substr(0, colon);
    return str_hash(label) ^ (static_cast<uint64_t>(t.kind) << 56);
  }

  // Emits a token stream for t. With assign set, unseen atoms get permanent
  // numbers; otherwise they are numbered per element through ds.locals
  // (cleared by the caller), which gives a sort key that ignores arrival
  // order.
  void render(TermId t, std::vector<uint64_t>& out, bool assign) {
    if (t < watermark) {  // includes kNoTerm
      out.push_back(1);
      out.push_back(t);
      return;
    }
    const Term& n = A[t];
    switch (n.kind) {
      case TermKind::Name:
      case TermKind::Key: {
        DigestScratch::Slot& slot = ds.assigned[t];
        if (slot.stamp == ds.epoch) {
          out.push_back(2);
          out.push_back(slot.token);
          return;
        }
        uint64_t fam = family_of(n);
        if (assign) {
          auto it = std::find_if(ds.fams.begin(), ds.fams.end(),
                                 [fam](const auto& p) { return p.first == fam; });
          if (it == ds.fams.end()) {
            ds.fams.push_back({fam, 0});
            it = ds.fams.end() - 1;
          }
          slot.stamp = ds.epoch;
          slot.token = fam * 0x9e3779b97f4a7c15ull + it->second++;
          out.push_back(2);
          out.push_back(slot.token);
        } else {
          auto it = std::find_if(ds.locals.begin(), ds.locals.end(),
                                 [t](const auto& p) { return p.first == t; });
          uint64_t idx;
          if (it == ds.locals.end()) {
            idx = ds.locals.size();
            ds.locals.push_back({t, idx});
          } else {
            idx = it->second;
          }
          out.push_back(3);
          out.push_back(fam);
          out.push_back(idx);
        }
        return;
      }
      case TermKind::Tag:
      case TermKind::Host:
        out.push_back(4);
        out.push_back(static_cast<uint64_t>(n.kind));
        out.push_back(str_hash(n.label));
        return;
      default:
        out.push_back(5);
        out.push_back(static_cast<uint64_t>(n.kind));
        render(n.left, out, assign);
        if (n.kind != TermKind::Hash) render(n.right, out, assign);
        return;
    }
  }
};

// Folds a collection whose order is not semantic: render every element
// without assigning atom numbers, sort the renderings, then walk the sorted
// order assigning for real. Ties are broken in container order; if a tied
// element's atoms resurface later that can distinguish two renamings of the
// same state (costing a re-visit), but it never merges distinct states.
template <typename Elem, typename RenderFn>
void fold_multiset(Fold& f, DigestScratch& ds, const std::vector<Elem>& elems,
                   RenderFn render) {
  ds.keys.clear();
  ds.spans.clear();
  for (uint32_t i = 0; i < elems.size(); ++i) {
    ds.locals.clear();
    size_t off = ds.keys.size();
    render(elems[i], ds.keys, false);
    ds.spans.push_back({off, ds.keys.size() - off, i});
  }
  std::stable_sort(ds.spans.begin(), ds.spans.end(),
                   [&ds](const DigestScratch::Span& a, const DigestScratch::Span& b) {
                     return std::lexicographical_compare(
                         ds.keys.begin() + static_cast<long>(a.off),
                         ds.keys.begin() + static_cast<long>(a.off + a.len),
                         ds.keys.begin() + static_cast<long>(b.off),
                         ds.keys.begin() + static_cast<long>(b.off + b.len));
                   });
  f.u64(ds.spans.size());
  for (const DigestScratch::Span& sp : ds.spans) {
    ds.toks.clear();
    render(elems[sp.idx], ds.toks, true);
    for (uint64_t t : ds.toks) f.u64(t);
  }
}

}  // namespace

// Further quotients, beyond the atom renaming in Canon:
//
//   * The PRNG state and freshness counters are omitted. They only choose
//     the flavour of atoms not yet minted, and every future mint is fresh
//     by construction either way, so two states equal up to renaming have
//     futures equal up to renaming.
//   * Sessions are renumbered by (claimed host, bypass, creation order):
//     the id handed out by negotiation order is not observable.
//   * The event log folds as a multiset. A consequent only has to precede
//     its antecedent, and every state the explorer keeps is violation-free,
//     so a future antecedent sees the whole log regardless of its internal
//     order; injective-matching feasibility then depends only on instance
//     counts per compatibility class (Hall's condition).
//   * Pending messages are a multiset (delivery picks by content, order is
//     the scheduler's future choice); the seen log is a set (replay
//     enumeration ignores duplicates).
std::array<uint64_t, 2> System::digest() const {
  Fold f;
  DigestScratch& ds = digest_scratch();
  Canon canon(*arena_, arena_watermark_, ds);

  ds.sess_order.clear();
  for (const SslSessionInfo& s : sessions_.all()) ds.sess_order.push_back(&s);
  std::sort(ds.sess_order.begin(), ds.sess_order.end(),
            [](const SslSessionInfo* a, const SslSessionInfo* b) {
              return std::tie(a->claimed_host, a->bypass, a->id) <
                     std::tie(b->claimed_host, b->bypass, b->id);
            });
  ds.sess_rank.assign(sessions_.all().size() + 1, 0);
  for (size_t i = 0; i < ds.sess_order.size(); ++i)
    ds.sess_rank[ds.sess_order[i]->id] = static_cast<uint32_t>(i) + 1;
  auto rank = [&](uint32_t id) { return id < ds.sess_rank.size() ? ds.sess_rank[id] : 0; };

  auto term = [&](TermId t) {
    ds.toks.clear();
    canon.render(t, ds.toks, true);
    for (uint64_t v : ds.toks) f.u64(v);
  };

  f.u64(static_cast<uint64_t>(variant_));
  f.u64(static_cast<uint64_t>(mode_));
  f.u64(static_cast<uint64_t>(starts_left_));
  f.u64(static_cast<uint64_t>(bypass_left_));
  f.u64(ds.sess_order.size());
  for (const SslSessionInfo* s : ds.sess_order) {
    f.u64(s->claimed_host);  // hosts are construction-time terms
    f.u64(s->bypass);
    term(s->key);
  }
  for (const Principal& p : principals_) {
    f.u64(static_cast<uint64_t>(p.role));
    f.u64(p.host);
    switch (p.role) {
      case Role::User: {
        const UserState& u = p.user;
        f.u64(static_cast<uint64_t>(u.phase));
        f.u64(rank(u.s1)); f.u64(rank(u.s2)); f.u64(rank(u.s3));
        term(u.code);
        term(u.ssl_ticket); term(u.ssl_link); term(u.smtp_link);
        f.u64(u.have_ssl_half); f.u64(u.have_smtp_half);
        term(u.ticket); term(u.link); term(u.wrap_key); term(u.id);
        break;
      }
      case Role::Ws: {
        const WsState& w = p.ws;
        f.u64(w.k_wr);
        f.u64(w.phones.size());
        for (const auto& [h, _] : w.phones) f.u64(h);
        for (const auto& [h, reg] : w.regs) {
          f.u64(h);
          f.u64(static_cast<uint64_t>(reg.phase));
          f.u64(rank(reg.s1)); f.u64(rank(reg.s2)); f.u64(rank(reg.s3));
          term(reg.otp); term(reg.link);
          f.u64(reg.have_redeem); f.u64(reg.have_access);
          term(reg.redeem_ticket); term(reg.redeem_key);
        }
        break;
      }
      case Role::Ra: {
        const RaState& ra = p.ra;
        f.u64(ra.k_wr); f.u64(ra.k_rc);
        for (const auto& [email, t] : ra.pending) {
          f.u64(email); term(t.nonce); term(t.ticket);
        }
        for (const auto& [h, flow] : ra.flows) {
          f.u64(h); f.u64(static_cast<uint64_t>(flow.phase));
        }
        break;
      }
      case Role::Ca:
        f.u64(p.ca.k_rc);
        f.u64(p.ca.issued);
        break;
      case Role::Attacker:
        break;
    }
  }

  auto render_msg = [&](const ChannelMsg& m, std::vector<uint64_t>& out, bool assign) {
    out.push_back(static_cast<uint64_t>(m.channel.kind));
    out.push_back(rank(m.channel.session));
    out.push_back(m.dst);  // principals' addresses are construction-time terms
    canon.render(m.payload, out, assign);
  };
  fold_multiset(f, ds, in_flight_, render_msg);

  ds.seen_set.clear();
  for (const ChannelMsg& m : seen_) {
    bool dup = false;
    for (const ChannelMsg& s : ds.seen_set)
      if (s.channel.kind == m.channel.kind && s.channel.session == m.channel.session &&
          s.payload == m.payload && s.dst == m.dst) {
        dup = true;
        break;
      }
    if (!dup) ds.seen_set.push_back(m);
  }
  fold_multiset(f, ds, ds.seen_set, render_msg);

  fold_multiset(f, ds, events_,
                [&](const Event& e, std::vector<uint64_t>& out, bool assign) {
                  out.push_back(static_cast<uint64_t>(e.kind));
                  out.push_back(e.host);
                  canon.render(e.a, out, assign);
                  canon.render(e.b, out, assign);
                });

  fold_multiset(f, ds, knowledge_.analyzed(),
                [&](TermId t, std::vector<uint64_t>& out, bool assign) {
                  canon.render(t, out, assign);
                });
  return {f.h1, f.h2};
}

Trace run_scenario(System& sys, const std::vector<Action>& schedule) {
  for (size_t i = 0; i < schedule.size(); ++i) {
    ApplyOutcome o = sys.apply(schedule[i]);
    if (!o.valid) throw ScheduleError(i, o.error);
  }
  return sys.trace();
}

Trace run_honest(System& sys) {
  for (;;) {
    const ChannelMsg* next = nullptr;
    for (const ChannelMsg& m : sys.in_flight_)
      if (m.channel.kind != ChannelKind::Sms || sys.sms_consumable(m)) {
        next = &m;
        break;
      }
    if (next) {
      Action d;
      d.kind = Action::Kind::Deliver;
      d.msg_index = next->send_index;
      sys.apply(d);
      continue;
    }
    bool started = false;
    if (sys.starts_left_ > 0) {
      for (const Principal& p : sys.principals_) {
        if (p.role == Role::User && p.user.phase == UserState::Phase::Idle) {
          Action s;
          s.kind = Action::Kind::StartUser;
          s.user = p.label;
          sys.apply(s);
          started = true;
          break;
        }
      }
    }
    if (!started) break;
  }
  return sys.trace();
}

}  // namespace chatsrp
