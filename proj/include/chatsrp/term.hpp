#pragma once
// Symbolic message algebra under the perfect-cryptography assumption.
// Terms are hash-consed in a TermArena, so two TermIds are equal iff the
// terms are structurally equal. There is deliberately no operation anywhere
// that recovers the argument of Hash.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chatsrp {

using TermId = uint32_t;
inline constexpr TermId kNoTerm = 0;

enum class TermKind : uint8_t {
  Name = 1,   // atomic data: nonces, links, ids, codes
  Key = 2,    // symmetric keys
  Tag = 3,    // protocol message tags
  Host = 4,   // principal identifiers
  Pair = 5,
  SymEnc = 6,  // SymEnc(payload, key)
  IdEnc = 7,   // distinct constructor so secrecy queries can target it
  Hash = 8,
};

inline bool is_leaf(TermKind k) {
  return k == TermKind::Name || k == TermKind::Key || k == TermKind::Tag ||
         k == TermKind::Host;
}

struct Term {
  TermKind kind;
  TermId left = kNoTerm;   // Pair first / SymEnc,IdEnc payload / Hash argument
  TermId right = kNoTerm;  // Pair second / SymEnc,IdEnc key
  std::string label;       // leaves only
  uint32_t fresh = 0;      // freshness index, leaves only
};

class TermArena {
 public:
  TermArena() { nodes_.emplace_back(); }  // id 0 reserved as "no term"

  TermId name(std::string_view label, uint32_t fresh = 0);
  TermId key(std::string_view label, uint32_t fresh = 0);
  TermId tag(std::string_view label);
  TermId host(std::string_view label);
  TermId pair(TermId a, TermId b);
  TermId sym_enc_term(TermId payload, TermId key);  // raw constructor
  TermId id_enc_term(TermId payload, TermId key);   // raw constructor
  TermId hash_term(TermId t);

  const Term& operator[](TermId id) const { return nodes_[id]; }
  size_t size() const { return nodes_.size(); }

  // S-expression rendering, e.g. (senc (pair (tag msg1) (host alice)) (key k_uw 0)).
  std::string sexpr(TermId id) const;
  // Inverse of sexpr; throws std::invalid_argument on malformed input.
  TermId parse(std::string_view text);

  // Canonical byte layout (see README): kind byte, then for leaves a
  // 32-bit big-endian label length + label bytes + 32-bit big-endian
  // freshness index, and for inner nodes the children in order.
  void canonical_bytes(TermId id, std::vector<uint8_t>& out) const;

 private:
  struct NodeKey {
    uint8_t kind;
    TermId left, right;
    uint32_t fresh;
    std::string label;
    bool operator==(const NodeKey&) const = default;
  };
  struct NodeKeyHash {
    size_t operator()(const NodeKey& k) const;
  };

  TermId intern(TermKind kind, TermId l, TermId r, std::string_view label, uint32_t fresh);

  std::vector<Term> nodes_;
  std::unordered_map<NodeKey, TermId, NodeKeyHash> index_;
};

// Pattern over terms. A wildcard node matches anything; a leaf pattern may
// leave label and/or freshness open; inner patterns match per child.
// Text form reuses the s-expression syntax with `_` for "any", e.g.
//   (name id _)            any id-labelled name
//   (ienc (name id _) _)   a wrapped id under any key
struct TermPattern {
  bool wildcard = false;
  TermKind kind = TermKind::Name;
  std::optional<std::string> label;
  std::optional<uint32_t> fresh;
  std::vector<TermPattern> children;

  bool matches(const TermArena& arena, TermId id) const;
  std::string to_string() const;
  static TermPattern parse(std::string_view text);  // throws std::invalid_argument
};

}  // namespace chatsrp
