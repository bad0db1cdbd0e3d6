#pragma once
// Registration-protocol state machines. Four honest roles (User, WS, RA, CA)
// communicate over a public network, per-session SSL channels, an SMS channel
// and plaintext email. Step functions are pure given the StepCtx; silent
// drops leave the state untouched and only add a diagnostic note.
//
// Variants:
//   ChatSrp      full flow: SMS round, ticket round trip, split message 4
//                (SSL half + emailed link), link access, id issuance.
//   ChatSrpNoSms same with the SMS/OTP round removed.
//   Ebia         baseline: plain registration request, activation link via
//                email, plaintext link access, id returned on access.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "chatsrp/crypto.hpp"
#include "chatsrp/prng.hpp"
#include "chatsrp/term.hpp"

namespace chatsrp {

enum class Role : uint8_t { User, Ws, Ra, Ca, Attacker };
enum class Variant : uint8_t { ChatSrp, ChatSrpNoSms, Ebia };

const char* to_string(Role r);
const char* to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

enum class ChannelKind : uint8_t { Public, Ssl, Sms, Smtp };

struct Channel {
  ChannelKind kind = ChannelKind::Public;
  uint32_t session = 0;  // Ssl only

  // SMS and the SSL negotiation channels are the only private transports.
  bool visible_to_attacker() const { return kind != ChannelKind::Sms; }
  bool operator==(const Channel&) const = default;
};

struct ChannelMsg {
  Channel channel;
  TermId payload = kNoTerm;
  TermId src = kNoTerm;  // advisory host reference; never authenticated
  TermId dst = kNoTerm;  // routing target
  uint64_t send_index = 0;
};

enum class EventKind : uint8_t {
  UserRequestsRegistration,  // (host)
  WSSendsSMS,                // (host, code)
  UserProcessesSMS,          // (host, code)
  WSSendsLink,               // (host, link)
  RASendsTicket,             // (host, ticket)
  UserReceivesRegistrationData,  // (host, ticket, link)
  UserReceivesId,            // (host, id)
  CASendsId,                 // (host, id)
};

const char* to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);
int event_arity(EventKind k);  // including the host argument

struct Event {
  EventKind kind;
  TermId host = kNoTerm;
  TermId a = kNoTerm;  // second argument, if any
  TermId b = kNoTerm;  // third argument, if any
  uint32_t seq = 0;    // assigned by the harness, unique per trace

  TermId arg(int i) const { return i == 0 ? host : i == 1 ? a : b; }
};

// One negotiated SSL session. The claimed host is what the negotiation said;
// for attacker bypass sessions it need not correspond to any honest user.
struct SslSessionInfo {
  uint32_t id = 0;
  TermId claimed_host = kNoTerm;
  TermId key = kNoTerm;
  bool bypass = false;
};

class SessionTable {
 public:
  const SslSessionInfo& negotiate(TermArena& arena, TermId claimed_host, bool bypass);
  const SslSessionInfo* find(uint32_t id) const;
  const std::vector<SslSessionInfo>& all() const { return sessions_; }
  bool operator==(const SessionTable&) const = default;

 private:
  std::vector<SslSessionInfo> sessions_;  // id == index + 1
  uint32_t next_key_index_ = 0;
};

// Per-label freshness counters for link/id/wrap-key creation.
struct FreshNames {
  std::map<std::string, uint32_t> next;

  TermId make_name(TermArena& arena, const std::string& label) {
    return arena.name(label, next[label]++);
  }
  TermId make_key(TermArena& arena, const std::string& label) {
    return arena.key(label, next[label]++);
  }
  bool operator==(const FreshNames&) const = default;
};

struct StepCtx {
  TermArena& arena;
  TentPrng& prng;
  FreshNames& fresh;
  SessionTable& sessions;
  Variant variant = Variant::ChatSrp;
  TermId ws_host = kNoTerm;
  TermId ra_host = kNoTerm;
  TermId ca_host = kNoTerm;
};

struct StartSignal {};
using StepInput = std::variant<StartSignal, ChannelMsg>;

struct StepResult {
  std::vector<ChannelMsg> outbound;
  std::vector<Event> events;
  std::vector<std::string> notes;  // reasons for silent drops
  bool accepted = false;           // any state change happened
};

// ---- principal states -------------------------------------------------

struct UserState {
  enum class Phase : uint8_t { Idle, AwaitSms, AwaitRegData, AwaitId, Done };

  TermId host = kNoTerm;
  Phase phase = Phase::Idle;
  uint32_t s1 = 0, s2 = 0, s3 = 0;  // SSL session ids
  TermId code = kNoTerm;
  // Split message 4: both halves must agree on the link before the user
  // proceeds. First-seen halves win; a mismatching late half is dropped.
  TermId ssl_ticket = kNoTerm, ssl_link = kNoTerm;
  TermId smtp_link = kNoTerm;
  bool have_ssl_half = false, have_smtp_half = false;
  TermId ticket = kNoTerm, link = kNoTerm;
  TermId wrap_key = kNoTerm;
  TermId id = kNoTerm;

  bool operator==(const UserState&) const = default;
};

struct WsReg {
  enum class Phase : uint8_t { AwaitCode, AwaitTicket, AwaitAccess, AwaitEid, Done };

  Phase phase = Phase::AwaitCode;
  uint32_t s1 = 0, s2 = 0, s3 = 0;
  TermId otp = kNoTerm;
  TermId link = kNoTerm;
  // Redemption halves (SSL message + plaintext link access), same
  // first-seen discipline as the user's message-4 halves.
  bool have_redeem = false, have_access = false;
  TermId redeem_ticket = kNoTerm, redeem_key = kNoTerm;

  bool operator==(const WsReg&) const = default;
};

struct WsState {
  TermId host = kNoTerm;
  TermId k_wr = kNoTerm;                 // shared with the RA, never on the wire
  std::map<TermId, std::string> phones;  // verified phone directory, by host
  std::map<TermId, WsReg> regs;          // one registration flow per host

  bool operator==(const WsState&) const = default;
};

struct RaFlow {
  enum class Phase : uint8_t { AwaitEid, Done };
  Phase phase = Phase::AwaitEid;
  bool operator==(const RaFlow&) const = default;
};

struct RaState {
  TermId host = kNoTerm;
  TermId k_wr = kNoTerm;
  TermId k_rc = kNoTerm;  // shared with the CA
  PendingStore pending;   // unredeemed tickets by email
  std::map<TermId, RaFlow> flows;

  bool operator==(const RaState&) const = default;
};

struct CaState {
  TermId host = kNoTerm;
  TermId k_rc = kNoTerm;
  uint32_t issued = 0;

  bool operator==(const CaState&) const = default;
};

// ---- step functions ----------------------------------------------------

StepResult user_step(UserState& st, const StepInput& in, StepCtx& ctx);
StepResult ws_step(WsState& st, const StepInput& in, StepCtx& ctx);
StepResult ra_step(RaState& st, const StepInput& in, StepCtx& ctx);
StepResult ca_step(CaState& st, const StepInput& in, StepCtx& ctx);

// Baseline variant automata (three-message flow, activation link by email).
StepResult ebia_step(UserState& st, const StepInput& in, StepCtx& ctx);
StepResult ebia_step(WsState& st, const StepInput& in, StepCtx& ctx);

// Honest-side SSL negotiation (used by user steps); bypass is the attacker's
// entry point and also publishes nothing here (the caller handles knowledge).
const SslSessionInfo& ssl_negotiate(StepCtx& ctx, TermId claimed_host, bool bypass = false);

}  // namespace chatsrp
