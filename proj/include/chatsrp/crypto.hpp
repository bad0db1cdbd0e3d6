#pragma once
// Perfect-cryptography operations over symbolic terms, and the ticket
// construction with its single-use pending store.

#include <array>
#include <map>
#include <optional>

#include "chatsrp/term.hpp"

namespace chatsrp {

enum class CryptoError : uint8_t {
  None = 0,
  NotAKey,           // key operand is not a Key term
  WrongConstructor,  // e.g. id_decrypt applied to a SymEnc
  WrongKey,          // constructor matches, key does not
};

struct DecryptResult {
  TermId term = kNoTerm;
  CryptoError error = CryptoError::None;
  bool ok() const { return error == CryptoError::None; }
};

// Throw std::invalid_argument unless k is a Key term.
TermId sym_encrypt(TermArena& arena, TermId m, TermId k);
TermId id_encrypt(TermArena& arena, TermId id, TermId k);

DecryptResult sym_decrypt(const TermArena& arena, TermId ct, TermId k);
DecryptResult id_decrypt(const TermArena& arena, TermId ct, TermId k);

// Ticket issuance. At most one unredeemed ticket per email; the entry is
// deleted exactly when the ticket is redeemed.
struct PendingTicket {
  TermId nonce = kNoTerm;
  TermId ticket = kNoTerm;
};

class PendingStore {
 public:
  bool has(TermId email) const { return entries_.count(email) != 0; }
  const PendingTicket* find(TermId email) const {
    auto it = entries_.find(email);
    return it == entries_.end() ? nullptr : &it->second;
  }
  void put(TermId email, PendingTicket t) { entries_[email] = t; }
  bool erase(TermId email) { return entries_.erase(email) != 0; }
  size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  bool operator==(const PendingStore&) const = default;

 private:
  std::map<TermId, PendingTicket> entries_;  // ordered: deterministic digests
};

enum class TicketError : uint8_t { None = 0, PendingRequestExists };

struct TicketResult {
  TermId ticket = kNoTerm;
  TicketError error = TicketError::None;
  bool ok() const { return error == TicketError::None; }
};

// Hash(Pair(nonce, email)), recorded in the store. nonce must be a Name
// (the RA renders PRNG nonces as hex-labelled names), email a Host.
TicketResult make_ticket(TermArena& arena, PendingStore& store, TermId nonce, TermId email);

// Optional concretizer: SHA-256 over the canonical serialization. Trace
// export only; the verified path never interprets these bytes.
std::array<uint8_t, 32> concretize(const TermArena& arena, TermId id);

}  // namespace chatsrp
