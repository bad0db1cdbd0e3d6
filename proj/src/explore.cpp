#include "chatsrp/explore.hpp"

#include <atomic>
#include <cstdio>
#include <deque>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

namespace chatsrp {

namespace {

struct DigestHash {
  size_t operator()(const std::array<uint64_t, 2>& d) const {
    return static_cast<size_t>(d[0] ^ (d[1] * 0x9e3779b97f4a7c15ull));
  }
};

using Visited = std::unordered_map<std::array<uint64_t, 2>, int, DigestHash>;

struct Node {
  System sys;
  std::vector<Action> path;
};

// Does this action list still violate the property when replayed from
// scratch? Inapplicable actions count as "no".
bool still_violates(const Fixture& fx, TermArena& arena, const std::vector<Property>& props,
                    const std::string& property, const std::vector<Action>& actions) {
  System sys(fx, arena);
  try {
    run_scenario(sys, actions);
  } catch (const ScheduleError&) {
    return false;
  }
  for (const Property& p : props) {
    if (p.name != property) continue;
    return !check_property(arena, sys.knowledge(), sys.events(), p).holds;
  }
  return false;
}

// Greedy delta-debugging: drop any action whose removal preserves the
// violation, until a fixpoint. Keeps exported counterexamples readable.
std::vector<Action> minimize(const Fixture& fx, TermArena& arena,
                             const std::vector<Property>& props, const std::string& property,
                             std::vector<Action> actions) {
  bool shrunk = true;
  while (shrunk) {
    shrunk = false;
    for (size_t i = actions.size(); i-- > 0;) {
      std::vector<Action> candidate = actions;
      candidate.erase(candidate.begin() + static_cast<long>(i));
      if (still_violates(fx, arena, props, property, candidate)) {
        actions = std::move(candidate);
        shrunk = true;
      }
    }
  }
  return actions;
}

ExploreResult finish_with_violation(const Fixture& fx, TermArena& arena,
                                    const std::vector<Property>& props, Verdict v,
                                    std::vector<Action> path, const ExploreStats& stats) {
  ExploreResult res;
  res.violation_found = true;
  res.attack = minimize(fx, arena, props, v.property, std::move(path));
  res.stats = stats;
  System replay(fx, arena);
  replay.set_recording(true);
  res.trace = run_scenario(replay, res.attack);
  // Re-derive the verdict from the replay; the two must agree.
  if (auto again = first_violation(arena, replay.knowledge(), replay.events(), props))
    res.verdict = *again;
  else
    res.verdict = std::move(v);
  return res;
}

// Expands one node; returns the violating child's path if a property broke.
// Effective children are appended via `emit`.
template <typename Emit>
std::optional<std::pair<Verdict, std::vector<Action>>> expand(
    Node& node, TermArena& arena, const std::vector<Property>& props, Visited& visited,
    ExploreStats& stats, Emit&& emit) {
  int depth = static_cast<int>(node.path.size());
  ++stats.expanded;
  for (const Action& a : node.sys.enabled_actions()) {
    System child = node.sys;
    ApplyOutcome o = child.apply(a);
    ++stats.applied;
    if (!o.valid) continue;
    if (!o.effective) {
      ++stats.pruned_ineffective;
      continue;
    }
    std::vector<Action> path = node.path;
    path.push_back(a);
    if (o.new_events > 0 || o.knowledge_grew) {
      if (auto v = first_violation(arena, child.knowledge(), child.events(), props))
        return std::make_pair(*v, std::move(path));
    }
    auto [it, fresh] = visited.try_emplace(child.digest(), depth + 1);
    if (!fresh) {
      if (it->second <= depth + 1) {
        ++stats.dedup_hits;
        continue;
      }
      it->second = depth + 1;
    }
    if (depth + 1 > stats.max_depth) stats.max_depth = depth + 1;
    emit(Node{std::move(child), std::move(path)});
  }
  return std::nullopt;
}

// Plain DFS from `start`, bounded by cfg. Returns a violation if found.
std::optional<std::pair<Verdict, std::vector<Action>>> dfs(
    Node start, TermArena& arena, const std::vector<Property>& props, const ExploreConfig& cfg,
    Visited& visited, ExploreStats& stats) {
  std::vector<Node> stack;
  stack.push_back(std::move(start));
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (cfg.progress && (stats.expanded & 0xFFFF) == 0 && stats.expanded > 0)
      std::fprintf(stderr, "  ... visited %zu expanded %llu depth %d\n", visited.size(),
                   static_cast<unsigned long long>(stats.expanded), stats.max_depth);
    if (static_cast<int>(node.path.size()) >= cfg.max_steps) continue;
    // Children collected first, then pushed in reverse so the canonical
    // first action is explored first (the stack pops from the back).
    std::vector<Node> children;
    auto hit = expand(node, arena, props, visited, stats,
                      [&](Node&& n) { children.push_back(std::move(n)); });
    if (hit) return hit;
    for (auto it = children.rbegin(); it != children.rend(); ++it)
      stack.push_back(std::move(*it));
    if (cfg.max_states && visited.size() >= cfg.max_states) {
      stats.truncated = true;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

ExploreResult explore_parallel(const Fixture& fx, TermArena& arena,
                               const std::vector<Property>& props, const ExploreConfig& cfg,
                               Node root, Visited visited, ExploreStats stats);

}  // namespace

ExploreResult explore(const Fixture& fixture, TermArena& arena,
                      const std::vector<Property>& props, const ExploreConfig& cfg) {
  Fixture fx = fixture;
  fx.attacker = AttackerMode::Active;  // exploration is adversarial by definition

  ExploreResult res;
  ExploreStats& stats = res.stats;

  System root(fx, arena);
  if (auto v = first_violation(arena, root.knowledge(), root.events(), props))
    return finish_with_violation(fx, arena, props, *v, {}, stats);

  Visited visited;
  visited.reserve(cfg.max_states ? cfg.max_states + 1 : 1u << 20);
  visited.emplace(root.digest(), 0);

  if (cfg.workers > 1)
    return explore_parallel(fx, arena, props, cfg, Node{std::move(root), {}},
                            std::move(visited), stats);

  auto hit = dfs(Node{std::move(root), {}}, arena, props, cfg, visited, stats);
  stats.visited = visited.size();
  if (hit) return finish_with_violation(fx, arena, props, hit->first, std::move(hit->second),
                                        stats);
  res.exhausted = !stats.truncated;
  return res;
}

namespace {

ExploreResult explore_parallel(const Fixture& fx, TermArena& arena,
                               const std::vector<Property>& props, const ExploreConfig& cfg,
                               Node root, Visited visited, ExploreStats stats) {
  // Phase 1: breadth-first until the frontier is wide enough to split.
  const size_t target = static_cast<size_t>(cfg.workers) * 16;
  std::deque<Node> frontier;
  frontier.push_back(std::move(root));
  while (!frontier.empty() && frontier.size() < target) {
    Node node = std::move(frontier.front());
    frontier.pop_front();
    if (static_cast<int>(node.path.size()) >= cfg.max_steps) continue;
    auto hit = expand(node, arena, props, visited, stats,
                      [&](Node&& n) { frontier.push_back(std::move(n)); });
    if (hit) {
      stats.visited = visited.size();
      return finish_with_violation(fx, arena, props, hit->first, std::move(hit->second), stats);
    }
  }
  if (frontier.empty()) {
    ExploreResult res;
    stats.visited = visited.size();
    res.stats = stats;
    res.exhausted = !stats.truncated;
    return res;
  }

  std::vector<Node> slots(std::make_move_iterator(frontier.begin()),
                          std::make_move_iterator(frontier.end()));

  struct Candidate {
    uint64_t slot = UINT64_MAX;
    Verdict verdict;
    std::vector<std::string> actions;  // serialized: worker arenas diverge
  };
  std::vector<Candidate> found(static_cast<size_t>(cfg.workers));
  std::vector<ExploreStats> wstats(static_cast<size_t>(cfg.workers));
  std::vector<char> wexhausted(static_cast<size_t>(cfg.workers), 1);
  std::atomic<uint64_t> best{UINT64_MAX};
  uint64_t per_worker_cap =
      cfg.max_states ? cfg.max_states / static_cast<uint64_t>(cfg.workers) + 1 : 0;

  auto work = [&](int w) {
    TermArena local(arena);  // private copy; identical TermId prefix
    ExploreConfig wcfg = cfg;
    wcfg.max_states = per_worker_cap;
    for (size_t i = static_cast<size_t>(w); i < slots.size();
         i += static_cast<size_t>(cfg.workers)) {
      // A hit in an earlier slot always outranks anything from here on.
      if (i > best.load(std::memory_order_relaxed)) break;
      Node node{slots[i].sys, slots[i].path};
      node.sys.rebind_arena(&local);
      Visited wvisited = visited;
      auto hit = dfs(std::move(node), local, props, wcfg, wvisited, wstats[w]);
      wstats[w].visited += wvisited.size() - visited.size();
      if (wstats[w].truncated) wexhausted[w] = 0;
      if (hit) {
        Candidate& c = found[static_cast<size_t>(w)];
        c.slot = i;
        c.verdict = hit->first;
        for (const Action& a : hit->second) c.actions.push_back(action_to_json(local, a));
        uint64_t cur = best.load(std::memory_order_relaxed);
        while (i < cur && !best.compare_exchange_weak(cur, i)) {
        }
        break;  // later slots of this worker cannot outrank slot i
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) threads.emplace_back(work, w);
  for (auto& t : threads) t.join();

  for (int w = 0; w < cfg.workers; ++w) {
    stats.expanded += wstats[w].expanded;
    stats.applied += wstats[w].applied;
    stats.pruned_ineffective += wstats[w].pruned_ineffective;
    stats.dedup_hits += wstats[w].dedup_hits;
    stats.visited += wstats[w].visited;
    if (wstats[w].max_depth > stats.max_depth) stats.max_depth = wstats[w].max_depth;
  }
  stats.visited += visited.size();

  const Candidate* winner = nullptr;
  for (const Candidate& c : found)
    if (c.slot != UINT64_MAX && (!winner || c.slot < winner->slot)) winner = &c;
  if (winner) {
    std::vector<Action> path;
    for (const std::string& s : winner->actions) path.push_back(action_from_json(s, arena));
    return finish_with_violation(fx, arena, props, winner->verdict, std::move(path), stats);
  }

  ExploreResult res;
  bool all = true;
  for (char e : wexhausted) all = all && e;
  stats.truncated = !all;
  res.stats = stats;
  res.exhausted = all;
  return res;
}

}  // namespace

ExploreResult explore_random(const Fixture& fixture, TermArena& arena,
                             const std::vector<Property>& props, const ExploreConfig& cfg,
                             uint64_t walks, uint64_t rng_seed) {
  Fixture fx = fixture;
  fx.attacker = AttackerMode::Active;

  ExploreResult res;
  ExploreStats& stats = res.stats;
  std::mt19937_64 rng(rng_seed);

  {
    System probe(fx, arena);
    if (auto v = first_violation(arena, probe.knowledge(), probe.events(), props))
      return finish_with_violation(fx, arena, props, *v, {}, stats);
  }

  for (uint64_t w = 0; w < walks; ++w) {
    System sys(fx, arena);
    std::vector<Action> path;
    for (int step = 0; step < cfg.max_steps; ++step) {
      std::vector<Action> acts = sys.enabled_actions();
      if (acts.empty()) break;
      const Action& a = acts[rng() % acts.size()];
      ApplyOutcome o = sys.apply(a);
      ++stats.applied;
      if (!o.valid || !o.effective) {
        ++stats.pruned_ineffective;
        continue;
      }
      path.push_back(a);
      if (static_cast<int>(path.size()) > stats.max_depth)
        stats.max_depth = static_cast<int>(path.size());
      if (o.new_events > 0 || o.knowledge_grew) {
        if (auto v = first_violation(arena, sys.knowledge(), sys.events(), props))
          return finish_with_violation(fx, arena, props, *v, std::move(path), stats);
      }
    }
    ++stats.expanded;
  }
  return res;  // random sampling never certifies the bound
}

}  // namespace chatsrp
