#pragma once
// Dolev-Yao network attacker. Knowledge keeps a destructor-saturated
// "analyzed" set: every observed term is torn apart as far as derivable keys
// allow. Derivability of arbitrary terms is then a structural synthesis
// check over that set, which is sound and complete with no depth bound.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chatsrp/protocol.hpp"
#include "chatsrp/term.hpp"

namespace chatsrp {

class Knowledge {
 public:
  Knowledge() = default;
  // Explorers copy knowledge per successor; the derivability memo is a pure
  // cache and is not worth carrying across.
  Knowledge(const Knowledge& o) : analyzed_(o.analyzed_), prov_(o.prov_), version_(o.version_) {}
  Knowledge& operator=(const Knowledge& o) {
    analyzed_ = o.analyzed_;
    prov_ = o.prov_;
    version_ = o.version_;
    memo_.clear();
    memo_version_ = 0;
    return *this;
  }
  Knowledge(Knowledge&&) = default;
  Knowledge& operator=(Knowledge&&) = default;

  // Observes a term: adds it and saturates under destructors (pair
  // projection, decryption under derivable keys). Returns true if anything
  // new was learned.
  bool add(const TermArena& arena, TermId t);

  // Exact derivability: t is in the analyzed set, or is a constructor
  // application of derivable parts. Hash and encryptions can also be built
  // forward; nothing inverts Hash.
  bool derivable(const TermArena& arena, TermId t) const;

  // Any term matching the pattern derivable? Searches the analyzed set and
  // constructor applications the pattern itself dictates.
  bool pattern_derivable(const TermArena& arena, const TermPattern& p) const;

  // Bounded enumeration of the constructor closure over the analyzed set,
  // for oracle comparisons and small-scale inspection. Throws if the
  // enumeration would exceed `cap` terms.
  std::vector<TermId> close(TermArena& arena, int constructor_depth,
                            size_t cap = 2000000) const;

  // Derivation tree for a derivable term (for auditing); nullopt otherwise.
  struct Derivation {
    TermId term;
    std::string rule;  // observed|fst|snd|sdec|idec|pair|senc|ienc|hash
    std::vector<Derivation> premises;
  };
  std::optional<Derivation> derive(const TermArena& arena, TermId t) const;

  bool contains(TermId t) const {
    return std::binary_search(analyzed_.begin(), analyzed_.end(), t);
  }
  const std::vector<TermId>& analyzed() const { return analyzed_; }
  uint64_t version() const { return version_; }
  bool operator==(const Knowledge& o) const { return analyzed_ == o.analyzed_; }

 private:
  struct Prov {
    TermId term = kNoTerm;
    const char* rule = "";  // always a literal
    TermId p1 = kNoTerm, p2 = kNoTerm;
  };

  bool insert(const TermArena& arena, TermId t, const char* rule, TermId p1 = kNoTerm,
              TermId p2 = kNoTerm);
  void saturate(const TermArena& arena);

  std::vector<TermId> analyzed_;  // kept sorted: deterministic digests
  std::vector<Prov> prov_;        // append order; one entry per analyzed term
  uint64_t version_ = 0;
  mutable std::unordered_map<TermId, bool> memo_;
  mutable uint64_t memo_version_ = 0;
};

// A schedulable action. Scheduler actions (StartUser, private Deliver) and
// attacker actions share one shape; which kinds are available depends on the
// attacker mode.
struct Action {
  enum class Kind : uint8_t { StartUser, Deliver, Block, Observe, Inject, SslBypass };

  Kind kind = Kind::Deliver;
  std::string user;          // StartUser
  uint64_t msg_index = 0;    // Deliver/Block/Observe: ChannelMsg::send_index
  ChannelMsg forged;         // Inject
  TermId claimed_host = kNoTerm;  // SslBypass
};

const char* to_string(Action::Kind k);

// Everything injection-template generation may look at.
struct AttackerView {
  const TermArena* arena = nullptr;
  const Knowledge* knowledge = nullptr;
  const std::vector<SslSessionInfo>* sessions = nullptr;
  std::vector<TermId> user_hosts;  // honest user principals
  TermId ws_host = kNoTerm, ra_host = kNoTerm, ca_host = kNoTerm;
  TermId attacker_host = kNoTerm;
  TermId attacker_name = kNoTerm;  // the attacker's own fresh name
  TermId attacker_key = kNoTerm;   // the attacker's own key
  Variant variant = Variant::ChatSrp;
  const std::vector<ChannelMsg>* seen = nullptr;  // messages observed so far
  int bypass_left = 0;

  // Receiver-side peeks for the enumerator only: they let it skip forgeries
  // the receiver provably drops on arrival. Action semantics (apply) never
  // read these; a schedule may still inject anything derivable.
  const WsState* ws_state = nullptr;
  const RaState* ra_state = nullptr;
  std::vector<std::pair<TermId, const UserState*>> user_states;
};

// Enumerates attacker moves in canonical order: SslBypass, Inject (replays
// then grammar templates), then per visible in-flight message Deliver and
// Block. Every Inject payload is derivable from the knowledge. Block reads
// before dropping and seen messages stay replayable, so a bare look never
// reaches a state Deliver/Block cannot.
//
// With `filtered` (the default) candidates whose receiver guard is certain
// to reject them are skipped; they would be pruned as ineffective anyway.
// Pass false to get the raw template superset (tests cross-check the filter
// against the real handlers with it).
std::vector<Action> attacker_choices(TermArena& arena, const AttackerView& view,
                                     const std::vector<ChannelMsg>& in_flight,
                                     bool filtered = true);

}  // namespace chatsrp
