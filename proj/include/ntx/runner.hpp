#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ntx/engine.hpp"
#include "ntx/scenario.hpp"
#include "ntx/trace.hpp"

namespace ntx {

// One full scenario execution with its observable leftovers.  failures holds
// assertion failures, invariant findings and livelock diagnostics; an empty
// list means the run is good.
struct RunOutcome {
  std::unique_ptr<Trace> trace;
  std::unique_ptr<Engine> engine;
  std::vector<std::string> failures;
  bool livelock = false;

  bool ok() const { return failures.empty(); }
};

RunOutcome run_scenario(const Scenario& sc, bool check_mode = false);

// Evaluates the scenario's expect lines against a finished engine.
std::vector<std::string> evaluate_assertions(const Engine& eng, const Scenario& sc);

}  // namespace ntx
