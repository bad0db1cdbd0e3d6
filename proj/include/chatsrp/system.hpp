#pragma once
// The simulation harness: one System instance is the complete network state
// of a run. Systems are plain values; the explorer copies them freely. The
// arena is shared and only ever grows, so copies stay cheap.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chatsrp/adversary.hpp"
#include "chatsrp/fixture.hpp"
#include "chatsrp/protocol.hpp"

namespace chatsrp {

struct Principal {
  Role role = Role::User;
  std::string label;
  TermId host = kNoTerm;
  // exactly one of these is meaningful, by role
  UserState user;
  WsState ws;
  RaState ra;
  CaState ca;

  bool operator==(const Principal&) const = default;
};

struct TraceStep {
  uint32_t index = 0;
  std::string actor;  // "scheduler" or "attacker"
  Action action;
  std::optional<ChannelMsg> msg;  // the message delivered or injected
  std::vector<Event> events;
  std::vector<std::string> notes;
  // Attacker knowledge after this step, present whenever it changed and at
  // every attacker step (s-expressions, sorted).
  std::vector<std::string> knowledge;
};

struct Trace {
  std::vector<TraceStep> steps;
  std::vector<Event> events;  // flattened, in emission order
};

struct ApplyOutcome {
  bool valid = false;      // action was applicable at all
  bool effective = false;  // something semantically changed
  std::string error;       // set when !valid
  size_t new_events = 0;
  bool knowledge_grew = false;
};

class System {
 public:
  System(const Fixture& fixture, TermArena& arena);

  // Available actions in canonical exploration order: SslBypass, Inject
  // (replays then templates), visible-message Deliver/Block, private
  // Deliver, StartUser. Passive/off modes only schedule deliveries/starts.
  std::vector<Action> enabled_actions();

  ApplyOutcome apply(const Action& a);

  bool quiescent();  // no enabled action changes anything

  const std::vector<Event>& events() const { return events_; }
  const Knowledge& knowledge() const { return knowledge_; }
  const std::vector<ChannelMsg>& in_flight() const { return in_flight_; }
  const std::vector<Principal>& principals() const { return principals_; }
  const SessionTable& sessions() const { return sessions_; }
  TermArena& arena() const { return *arena_; }
  Variant variant() const { return variant_; }
  AttackerMode attacker_mode() const { return mode_; }
  int starts_left() const { return starts_left_; }
  int bypass_left() const { return bypass_left_; }

  const Principal* by_host(TermId host) const;
  const Principal* by_label(const std::string& label) const;

  void set_recording(bool on) { recording_ = on; }
  const std::vector<TraceStep>& trace_steps() const { return trace_; }
  Trace trace() const { return Trace{trace_, events_}; }

  // Structural digest over everything the semantics can observe, including
  // the event log (correspondence state) and attacker knowledge. Quotients
  // out run-minted atom identity, session numbering, and log order; two
  // states with equal digests have indistinguishable futures.
  std::array<uint64_t, 2> digest() const;

  // Explorer plumbing: repoint at an arena copy with an identical prefix so
  // worker threads can intern without racing. All held TermIds stay valid.
  void rebind_arena(TermArena* a) { arena_ = a; }

  AttackerView attacker_view() const;

 private:
  friend Trace run_honest(System& sys);

  Principal* find_principal(TermId host);
  StepResult run_step(Principal& p, const StepInput& in);
  void commit(StepResult& r, const Action& a, const char* actor,
              const std::optional<ChannelMsg>& m, ApplyOutcome& out);
  bool sms_consumable(const ChannelMsg& m);
  void record(const Action& a, const char* actor, const std::optional<ChannelMsg>& m,
              const StepResult* r, bool knowledge_changed);

  TermArena* arena_;
  Variant variant_;
  AttackerMode mode_;
  std::vector<Principal> principals_;
  std::map<TermId, uint32_t> by_host_;
  SessionTable sessions_;
  TentPrng prng_;
  FreshNames fresh_;
  Knowledge knowledge_;
  std::vector<ChannelMsg> seen_;       // attacker-observed messages
  std::vector<ChannelMsg> in_flight_;  // send_index ascending
  std::vector<Event> events_;
  uint64_t next_send_index_ = 0;
  uint32_t next_event_seq_ = 0;
  int starts_left_ = 0;
  int bypass_left_ = 0;
  TermId ws_host_ = kNoTerm, ra_host_ = kNoTerm, ca_host_ = kNoTerm;
  TermId attacker_host_ = kNoTerm, attacker_name_ = kNoTerm, attacker_key_ = kNoTerm;
  TermId arena_watermark_ = 0;  // terms below this existed before step one
  bool recording_ = false;
  std::vector<TraceStep> trace_;
};

struct ScheduleError : std::runtime_error {
  size_t step;
  ScheduleError(size_t step_, const std::string& what_)
      : std::runtime_error("invalid action at step " + std::to_string(step_) + ": " + what_),
        step(step_) {}
};

// Applies an explicit schedule; throws ScheduleError on an inapplicable
// action. The system must have recording enabled if a trace is wanted.
Trace run_scenario(System& sys, const std::vector<Action>& schedule);

// Attacker-free/default scheduling: FIFO delivery, starting users as the
// network drains. Produces the canonical honest run of the fixture variant.
Trace run_honest(System& sys);

}  // namespace chatsrp
