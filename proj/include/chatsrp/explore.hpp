#pragma once
// Bounded adversarial state-space search. Depth-first over the action
// semantics of System with an always-active attacker, pruning
//
//   - actions that changed nothing (the parent state subsumes the child),
//   - states already reached at the same or smaller depth (structural
//     digest), which collapses interleavings that commute.
//
// Property violations are stable under extension (see verifier.hpp), so each
// child is checked once, when its events or knowledge grew. A hit is
// reproduced by replaying the action path on a fresh System with recording
// enabled; the path doubles as an exportable schedule.

#include <cstdint>
#include <vector>

#include "chatsrp/system.hpp"
#include "chatsrp/verifier.hpp"

namespace chatsrp {

struct ExploreConfig {
  int max_steps = 40;       // actions per path
  uint64_t max_states = 0;  // distinct states to visit; 0 = unbounded
  int workers = 1;
  bool progress = false;  // periodic one-line search status on stderr
};

struct ExploreStats {
  uint64_t expanded = 0;            // states whose actions were enumerated
  uint64_t applied = 0;             // apply() calls
  uint64_t pruned_ineffective = 0;  // children identical to their parent
  uint64_t dedup_hits = 0;          // children seen before at <= depth
  uint64_t visited = 0;             // distinct states
  int max_depth = 0;
  bool truncated = false;  // stopped at max_states
};

struct ExploreResult {
  bool violation_found = false;
  Verdict verdict;
  std::vector<Action> attack;  // action path reaching the violation
  Trace trace;                 // recorded replay of that path
  bool exhausted = false;      // the bounded space was covered completely
  ExploreStats stats;
};

// Runs the search. The fixture's attacker mode is overridden to active;
// start/bypass budgets come from the fixture. With workers > 1 the search
// builds a breadth-first frontier, hands disjoint slices to threads (each
// owning an arena copy), and merges first-counterexample-wins with the
// frontier position as the deterministic tie-break.
ExploreResult explore(const Fixture& fixture, TermArena& arena,
                      const std::vector<Property>& props, const ExploreConfig& cfg);

// Falsification by random walks instead of systematic search: `walks`
// schedules of uniformly chosen enabled actions. Never reports exhaustion.
ExploreResult explore_random(const Fixture& fixture, TermArena& arena,
                             const std::vector<Property>& props, const ExploreConfig& cfg,
                             uint64_t walks, uint64_t rng_seed);

}  // namespace chatsrp
