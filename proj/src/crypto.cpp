#include "chatsrp/crypto.hpp"

#include <stdexcept>

#include "chatsrp/sha256.hpp"

namespace chatsrp {

static void require_key(const TermArena& arena, TermId k) {
  if (k == kNoTerm || arena[k].kind != TermKind::Key)
    throw std::invalid_argument("encryption key operand is not a Key term");
}

TermId sym_encrypt(TermArena& arena, TermId m, TermId k) {
  require_key(arena, k);
  return arena.sym_enc_term(m, k);
}

TermId id_encrypt(TermArena& arena, TermId id, TermId k) {
  require_key(arena, k);
  return arena.id_enc_term(id, k);
}

static DecryptResult decrypt(const TermArena& arena, TermId ct, TermId k, TermKind want) {
  if (k == kNoTerm || arena[k].kind != TermKind::Key) return {kNoTerm, CryptoError::NotAKey};
  if (ct == kNoTerm || arena[ct].kind != want) return {kNoTerm, CryptoError::WrongConstructor};
  if (arena[ct].right != k) return {kNoTerm, CryptoError::WrongKey};
  return {arena[ct].left, CryptoError::None};
}

DecryptResult sym_decrypt(const TermArena& arena, TermId ct, TermId k) {
  return decrypt(arena, ct, k, TermKind::SymEnc);
}

DecryptResult id_decrypt(const TermArena& arena, TermId ct, TermId k) {
  return decrypt(arena, ct, k, TermKind::IdEnc);
}

TicketResult make_ticket(TermArena& arena, PendingStore& store, TermId nonce, TermId email) {
  if (store.has(email)) return {kNoTerm, TicketError::PendingRequestExists};
  TermId ticket = arena.hash_term(arena.pair(nonce, email));
  store.put(email, PendingTicket{nonce, ticket});
  return {ticket, TicketError::None};
}

std::array<uint8_t, 32> concretize(const TermArena& arena, TermId id) {
  std::vector<uint8_t> bytes;
  arena.canonical_bytes(id, bytes);
  return sha256(bytes.data(), bytes.size());
}

}  // namespace chatsrp
