#pragma once

#include <cstdio>
#include <string>

namespace lentil {

// One valve actuation: open nozzle `nozzle` at fire_at_s (monotonic line
// clock) for pulse_ms. The air jet is live over
// [fire_at_s + valve_switch, fire_at_s + valve_switch + pulse].
struct EjectionCommand {
  int nozzle = 0;
  double fire_at_s = 0.0;
  double pulse_ms = 0.0;
};

// Consumer of scheduled commands (the hardware bridge in the real line).
class CommandSink {
 public:
  virtual ~CommandSink() = default;
  virtual void fire(const EjectionCommand& cmd) = 0;
};

}  // namespace lentil
