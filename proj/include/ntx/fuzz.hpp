#pragma once

#include <cstdint>
#include <string>

#include "ntx/scenario.hpp"

namespace ntx {

// Seeded random workload: a few sites, single-copy files, nested invocation
// trees with mixed reads, writes, failures and repartitions that always end
// merged.  The same seed always yields the same scenario text.
Scenario generate_scenario(std::uint64_t seed);

struct FuzzResult {
  bool ok = true;
  std::string detail;  // failure description plus the scenario text
};

// Generates, runs and checks one workload: the run must quiesce, leave no
// orphaned state, keep every invariant, and the surviving writes must be
// serializable.
FuzzResult fuzz_one(std::uint64_t seed);

}  // namespace ntx
