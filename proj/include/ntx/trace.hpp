#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ntx/ids.hpp"

namespace ntx {

// Append-only event log.  Lines are formatted identically on every run of
// the same scenario, which is what the golden tests and the determinism
// check compare byte for byte.
struct TraceRecord {
  long step = 0;
  SiteId site;
  std::string kind;    // message|grant|denial|push|pop|restore|status-change|durable-write|sweep
  std::string detail;
};

class Trace {
 public:
  void set_step(long step) { step_ = step; }
  long step() const { return step_; }

  void add(SiteId site, const std::string& kind, const std::string& detail) {
    records_.push_back(TraceRecord{step_, site, kind, detail});
  }

  const std::vector<TraceRecord>& records() const { return records_; }

  void dump(std::ostream& os) const {
    for (const auto& r : records_)
      os << "step=" << r.step << " site=" << r.site.str() << ' ' << r.kind
         << ' ' << r.detail << '\n';
  }

  std::string text() const;

 private:
  long step_ = 0;
  std::vector<TraceRecord> records_;
};

}  // namespace ntx
