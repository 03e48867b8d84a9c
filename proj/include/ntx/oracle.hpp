#pragma once

#include <map>
#include <string>
#include <vector>

#include "ntx/engine.hpp"

namespace ntx {

// Brute-force serializability witness.  The surviving writes (those whose
// whole superior chain committed) are grouped per top-level transaction and
// replayed in every permutation of the committed top-levels; the run passes
// when some single order reproduces the final content of every replica,
// honoring which replicas each commit actually reached.
struct SerializabilityReport {
  bool serializable = false;
  std::vector<Tid> witness;  // the equivalent serial order, when found
  std::string detail;        // what could not be matched
};

SerializabilityReport check_serializable(const Engine& eng);

// The page contents a replica should end with when the given top-levels
// commit in the given order, starting from the declared initial pages.
// Returns one state per file name.  Throws std::out_of_range on a write
// past the end of a file, which a caller treats as "order impossible".
std::map<std::string, std::vector<std::string>> replay_order(
    const Engine& eng, const std::vector<Tid>& order);

}  // namespace ntx
