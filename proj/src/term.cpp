#include "chatsrp/term.hpp"

#include <cctype>
#include <stdexcept>

namespace chatsrp {

namespace {

const char* kind_word(TermKind k) {
  switch (k) {
    case TermKind::Name: return "name";
    case TermKind::Key: return "key";
    case TermKind::Tag: return "tag";
    case TermKind::Host: return "host";
    case TermKind::Pair: return "pair";
    case TermKind::SymEnc: return "senc";
    case TermKind::IdEnc: return "ienc";
    case TermKind::Hash: return "hash";
  }
  return "?";
}

std::optional<TermKind> word_kind(std::string_view w) {
  if (w == "name") return TermKind::Name;
  if (w == "key") return TermKind::Key;
  if (w == "tag") return TermKind::Tag;
  if (w == "host") return TermKind::Host;
  if (w == "pair") return TermKind::Pair;
  if (w == "senc") return TermKind::SymEnc;
  if (w == "ienc") return TermKind::IdEnc;
  if (w == "hash") return TermKind::Hash;
  return std::nullopt;
}

bool label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
         c == '.' || c == '@' || c == ':' || c == '+';
}

void check_label(std::string_view label) {
  if (label.empty()) throw std::invalid_argument("empty term label");
  for (char c : label)
    if (!label_char(c))
      throw std::invalid_argument("bad character in term label: " + std::string(label));
}

// Shared tokenizer for terms and patterns.
struct Lexer {
  std::string_view text;
  size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c))
      throw std::invalid_argument("expected '" + std::string(1, c) + "' at offset " +
                                  std::to_string(pos));
  }
  std::string_view atom() {
    skip_ws();
    size_t start = pos;
    while (pos < text.size() && (label_char(text[pos]))) ++pos;
    if (pos == start) throw std::invalid_argument("expected atom at offset " + std::to_string(pos));
    return text.substr(start, pos - start);
  }
  bool done() {
    skip_ws();
    return pos == text.size();
  }
};

uint32_t parse_index(std::string_view s) {
  uint32_t v = 0;
  if (s.empty()) throw std::invalid_argument("expected freshness index");
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw std::invalid_argument("bad freshness index: " + std::string(s));
    v = v * 10 + static_cast<uint32_t>(c - '0');
  }
  return v;
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

size_t TermArena::NodeKeyHash::operator()(const NodeKey& k) const {
  size_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(k.kind);
  mix(k.left);
  mix(k.right);
  mix(k.fresh);
  for (char c : k.label) mix(static_cast<uint8_t>(c));
  return h;
}

TermId TermArena::intern(TermKind kind, TermId l, TermId r, std::string_view label,
                         uint32_t fresh) {
  NodeKey key{static_cast<uint8_t>(kind), l, r, fresh, std::string(label)};
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  TermId id = static_cast<TermId>(nodes_.size());
  nodes_.push_back(Term{kind, l, r, std::string(label), fresh});
  index_.emplace(std::move(key), id);
  return id;
}

TermId TermArena::name(std::string_view label, uint32_t fresh) {
  check_label(label);
  return intern(TermKind::Name, kNoTerm, kNoTerm, label, fresh);
}
TermId TermArena::key(std::string_view label, uint32_t fresh) {
  check_label(label);
  return intern(TermKind::Key, kNoTerm, kNoTerm, label, fresh);
}
TermId TermArena::tag(std::string_view label) {
  check_label(label);
  return intern(TermKind::Tag, kNoTerm, kNoTerm, label, 0);
}
TermId TermArena::host(std::string_view label) {
  check_label(label);
  return intern(TermKind::Host, kNoTerm, kNoTerm, label, 0);
}
TermId TermArena::pair(TermId a, TermId b) {
  if (a == kNoTerm || b == kNoTerm) throw std::invalid_argument("pair of missing term");
  return intern(TermKind::Pair, a, b, {}, 0);
}
TermId TermArena::sym_enc_term(TermId payload, TermId key) {
  if (payload == kNoTerm || key == kNoTerm) throw std::invalid_argument("senc of missing term");
  return intern(TermKind::SymEnc, payload, key, {}, 0);
}
TermId TermArena::id_enc_term(TermId payload, TermId key) {
  if (payload == kNoTerm || key == kNoTerm) throw std::invalid_argument("ienc of missing term");
  return intern(TermKind::IdEnc, payload, key, {}, 0);
}
TermId TermArena::hash_term(TermId t) {
  if (t == kNoTerm) throw std::invalid_argument("hash of missing term");
  return intern(TermKind::Hash, t, kNoTerm, {}, 0);
}

std::string TermArena::sexpr(TermId id) const {
  if (id == kNoTerm || id >= nodes_.size()) throw std::invalid_argument("bad term id");
  const Term& t = nodes_[id];
  std::string out = "(";
  out += kind_word(t.kind);
  switch (t.kind) {
    case TermKind::Name:
    case TermKind::Key:
      out += " " + t.label + " " + std::to_string(t.fresh);
      break;
    case TermKind::Tag:
    case TermKind::Host:
      out += " " + t.label;
      break;
    case TermKind::Pair:
    case TermKind::SymEnc:
    case TermKind::IdEnc:
      out += " " + sexpr(t.left) + " " + sexpr(t.right);
      break;
    case TermKind::Hash:
      out += " " + sexpr(t.left);
      break;
  }
  out += ")";
  return out;
}

namespace {

TermId parse_term(Lexer& lx, TermArena& arena) {
  lx.expect('(');
  std::string_view word = lx.atom();
  auto kind = word_kind(word);
  if (!kind) throw std::invalid_argument("unknown term constructor: " + std::string(word));
  TermId result = kNoTerm;
  switch (*kind) {
    case TermKind::Name:
    case TermKind::Key: {
      std::string label(lx.atom());
      uint32_t fresh = parse_index(lx.atom());
      result = *kind == TermKind::Name ? arena.name(label, fresh) : arena.key(label, fresh);
      break;
    }
    case TermKind::Tag:
      result = arena.tag(lx.atom());
      break;
    case TermKind::Host:
      result = arena.host(lx.atom());
      break;
    case TermKind::Pair:
    case TermKind::SymEnc:
    case TermKind::IdEnc: {
      TermId l = parse_term(lx, arena);
      TermId r = parse_term(lx, arena);
      result = *kind == TermKind::Pair    ? arena.pair(l, r)
               : *kind == TermKind::SymEnc ? arena.sym_enc_term(l, r)
                                           : arena.id_enc_term(l, r);
      break;
    }
    case TermKind::Hash:
      result = arena.hash_term(parse_term(lx, arena));
      break;
  }
  lx.expect(')');
  return result;
}

}  // namespace

TermId TermArena::parse(std::string_view text) {
  Lexer lx{text};
  TermId id = parse_term(lx, *this);
  if (!lx.done()) throw std::invalid_argument("trailing input after term");
  return id;
}

void TermArena::canonical_bytes(TermId id, std::vector<uint8_t>& out) const {
  if (id == kNoTerm || id >= nodes_.size()) throw std::invalid_argument("bad term id");
  const Term& t = nodes_[id];
  out.push_back(static_cast<uint8_t>(t.kind));
  if (is_leaf(t.kind)) {
    put_u32_be(out, static_cast<uint32_t>(t.label.size()));
    out.insert(out.end(), t.label.begin(), t.label.end());
    put_u32_be(out, t.fresh);
    return;
  }
  canonical_bytes(t.left, out);
  if (t.kind != TermKind::Hash) canonical_bytes(t.right, out);
}

bool TermPattern::matches(const TermArena& arena, TermId id) const {
  if (wildcard) return id != kNoTerm;
  const Term& t = arena[id];
  if (t.kind != kind) return false;
  if (is_leaf(kind)) {
    if (label && t.label != *label) return false;
    if (fresh && t.fresh != *fresh) return false;
    return true;
  }
  size_t arity = kind == TermKind::Hash ? 1 : 2;
  if (children.size() != arity) return false;
  if (!children[0].matches(arena, t.left)) return false;
  if (arity == 2 && !children[1].matches(arena, t.right)) return false;
  return true;
}

std::string TermPattern::to_string() const {
  if (wildcard) return "_";
  std::string out = "(";
  out += kind_word(kind);
  if (is_leaf(kind)) {
    out += " " + (label ? *label : std::string("_"));
    if (kind == TermKind::Name || kind == TermKind::Key)
      out += " " + (fresh ? std::to_string(*fresh) : std::string("_"));
  } else {
    for (const auto& c : children) out += " " + c.to_string();
  }
  out += ")";
  return out;
}

namespace {

TermPattern parse_pattern(Lexer& lx) {
  lx.skip_ws();
  if (lx.pos < lx.text.size() && lx.text[lx.pos] == '_') {
    ++lx.pos;
    TermPattern p;
    p.wildcard = true;
    return p;
  }
  lx.expect('(');
  std::string_view word = lx.atom();
  auto kind = word_kind(word);
  if (!kind) throw std::invalid_argument("unknown pattern constructor: " + std::string(word));
  TermPattern p;
  p.kind = *kind;
  if (is_leaf(*kind)) {
    std::string_view lab = lx.atom();
    if (lab != "_") p.label = std::string(lab);
    if (*kind == TermKind::Name || *kind == TermKind::Key) {
      std::string_view fr = lx.atom();
      if (fr != "_") p.fresh = parse_index(fr);
    }
  } else {
    size_t arity = *kind == TermKind::Hash ? 1 : 2;
    for (size_t i = 0; i < arity; ++i) p.children.push_back(parse_pattern(lx));
  }
  lx.expect(')');
  return p;
}

}  // namespace

TermPattern TermPattern::parse(std::string_view text) {
  Lexer lx{text};
  TermPattern p = parse_pattern(lx);
  if (!lx.done()) throw std::invalid_argument("trailing input after pattern");
  return p;
}

}  // namespace chatsrp
