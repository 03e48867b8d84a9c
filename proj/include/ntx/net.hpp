#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ntx/messages.hpp"
#include "ntx/trace.hpp"

namespace ntx {

// Assignment of every site to exactly one partition.  Sites in the same
// partition reach each other; sites in different partitions exchange
// nothing at all.
class Topology {
 public:
  Topology() = default;
  static Topology single(const std::vector<SiteId>& sites);
  static Topology of_groups(const std::vector<std::vector<SiteId>>& groups);

  void assign(SiteId site, int partition);
  bool connected(SiteId a, SiteId b) const;
  std::set<SiteId> partition_of(SiteId s) const;
  const std::map<SiteId, int>& assignment() const { return part_; }
  std::vector<SiteId> sites() const;
  std::string str() const;

 private:
  std::map<SiteId, int> part_;
};

struct Envelope {
  SiteId from, to;
  long seq = 0;  // per (from, to) channel, preserves channel order
  Message msg;
};

struct Counters {
  long remote = 0;
  long local = 0;
  long dropped = 0;
};

// Single-threaded event core.  Queued work is either a message delivery or
// a site-local timer (used to step process scripts).  The next event is
// always the unique minimum of (due step, from, to, channel seq), so runs
// are reproducible to the byte.  Sending to the local site invokes the
// destination handler immediately and counts as a local call, not a
// message.
class Network {
 public:
  Network() = default;
  Network(std::vector<SiteId> sites, Trace* trace);

  void on_deliver(std::function<void(const Envelope&)> fn) { deliver_ = std::move(fn); }
  void on_timer(std::function<void(const Pid&)> fn) { timer_ = std::move(fn); }
  // Invoked once per site whose partition membership changed, in ordinal
  // order, after every site table has been updated.
  void on_topology_change(std::function<void(SiteId)> fn) { topo_change_ = std::move(fn); }

  void send(SiteId from, SiteId to, Message msg);
  void schedule(const Pid& pid, long delay_steps);

  void repartition(const Topology& next);
  bool step();  // false when quiescent
  bool quiescent() const { return queue_.empty(); }
  long now() const { return now_; }

  bool accessible(SiteId at, SiteId other) const;
  const std::set<SiteId>& site_table(SiteId at) const;
  const Topology& topology() const { return topo_; }
  const std::vector<SiteId>& sites() const { return sites_; }

  const std::map<std::string, Counters>& counters_by_phase() const { return counters_; }
  Counters totals() const;

  // Peek used by delivery-triggered fault injection.
  struct NextEvent {
    bool timer = false;
    Envelope env;
    Pid pid;
  };
  std::optional<NextEvent> peek() const;

  std::vector<std::string> pending_dump() const;

 private:
  struct Pending {
    long due = 0;
    SiteId from, to;
    long seq = 0;
    bool timer = false;
    Envelope env;
    Pid pid;
    bool operator<(const Pending& o) const {
      if (due != o.due) return due < o.due;
      if (from != o.from) return from < o.from;
      if (to != o.to) return to < o.to;
      return seq < o.seq;
    }
  };

  void count(MsgKind k, long Counters::*field);

  std::vector<SiteId> sites_;
  Trace* trace_ = nullptr;
  Topology topo_;
  std::map<SiteId, std::set<SiteId>> tables_;
  std::set<Pending> queue_;
  std::map<std::pair<int, int>, long> seq_;
  long now_ = 0;
  std::map<std::string, Counters> counters_;
  std::function<void(const Envelope&)> deliver_;
  std::function<void(const Pid&)> timer_;
  std::function<void(SiteId)> topo_change_;
};

}  // namespace ntx
