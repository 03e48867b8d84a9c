#include "ntx/net.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ntx {

Topology Topology::single(const std::vector<SiteId>& sites) {
  Topology t;
  for (SiteId s : sites) t.part_[s] = 0;
  return t;
}

Topology Topology::of_groups(const std::vector<std::vector<SiteId>>& groups) {
  Topology t;
  int p = 0;
  for (const auto& g : groups) {
    for (SiteId s : g) t.part_[s] = p;
    ++p;
  }
  return t;
}

void Topology::assign(SiteId site, int partition) { part_[site] = partition; }

bool Topology::connected(SiteId a, SiteId b) const {
  auto ia = part_.find(a);
  auto ib = part_.find(b);
  if (ia == part_.end() || ib == part_.end()) return false;
  return ia->second == ib->second;
}

std::set<SiteId> Topology::partition_of(SiteId s) const {
  std::set<SiteId> out;
  auto it = part_.find(s);
  if (it == part_.end()) return out;
  for (const auto& [site, p] : part_)
    if (p == it->second) out.insert(site);
  return out;
}

std::vector<SiteId> Topology::sites() const {
  std::vector<SiteId> out;
  for (const auto& [site, _] : part_) out.push_back(site);
  return out;
}

std::string Topology::str() const {
  std::map<int, std::vector<SiteId>> groups;
  for (const auto& [site, p] : part_) groups[p].push_back(site);
  std::ostringstream os;
  bool first_group = true;
  for (const auto& [_, g] : groups) {
    if (!first_group) os << " | ";
    first_group = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i) os << ' ';
      os << g[i].str();
    }
  }
  return os.str();
}

Network::Network(std::vector<SiteId> sites, Trace* trace)
    : sites_(std::move(sites)), trace_(trace) {
  std::sort(sites_.begin(), sites_.end());
  topo_ = Topology::single(sites_);
  for (SiteId s : sites_) tables_[s] = topo_.partition_of(s);
}

void Network::count(MsgKind k, long Counters::*field) {
  counters_[phase_of(k)].*field += 1;
}

void Network::send(SiteId from, SiteId to, Message msg) {
  if (from == to) {
    count(msg.kind, &Counters::local);
    if (trace_)
      trace_->add(to, "message", "local " + msg.detail() + " from=" + from.str());
    if (deliver_) deliver_(Envelope{from, to, 0, std::move(msg)});
    return;
  }
  if (!topo_.connected(from, to)) {
    count(msg.kind, &Counters::dropped);
    if (trace_)
      trace_->add(from, "message",
                  "dropped " + msg.detail() + " to=" + to.str() + " cause=partition");
    return;
  }
  Pending p;
  p.due = now_ + 1;
  p.from = from;
  p.to = to;
  p.seq = ++seq_[{from.ordinal, to.ordinal}];
  p.env = Envelope{from, to, p.seq, std::move(msg)};
  queue_.insert(std::move(p));
}

void Network::schedule(const Pid& pid, long delay_steps) {
  if (delay_steps < 1) delay_steps = 1;
  Pending p;
  p.due = now_ + delay_steps;
  p.from = pid.site;
  p.to = pid.site;
  p.seq = ++seq_[{pid.site.ordinal, pid.site.ordinal}];
  p.timer = true;
  p.pid = pid;
  queue_.insert(std::move(p));
}

void Network::repartition(const Topology& next) {
  for (SiteId s : sites_)
    if (next.assignment().count(s) == 0)
      throw std::runtime_error("repartition misses site " + s.str());

  std::vector<SiteId> changed;
  for (SiteId s : sites_)
    if (topo_.partition_of(s) != next.partition_of(s)) changed.push_back(s);

  Topology prev = topo_;
  topo_ = next;

  // Traffic caught between newly separated sites vanishes with the link.
  for (auto it = queue_.begin(); it != queue_.end();) {
    if (!it->timer && !topo_.connected(it->from, it->to)) {
      count(it->env.msg.kind, &Counters::dropped);
      if (trace_)
        trace_->add(it->from, "message",
                    "dropped " + it->env.msg.detail() + " to=" + it->to.str() +
                        " cause=repartition");
      it = queue_.erase(it);
    } else {
      ++it;
    }
  }

  if (changed.empty()) return;
  for (SiteId s : changed) tables_[s] = topo_.partition_of(s);
  if (trace_)
    for (SiteId s : changed)
      trace_->add(s, "status-change", "topology-change table=" + topo_.str());
  if (topo_change_)
    for (SiteId s : changed) topo_change_(s);
}

bool Network::step() {
  if (queue_.empty()) return false;
  Pending p = *queue_.begin();
  queue_.erase(queue_.begin());
  ++now_;
  if (trace_) trace_->set_step(now_);
  if (p.timer) {
    if (timer_) timer_(p.pid);
  } else {
    count(p.env.msg.kind, &Counters::remote);
    if (trace_)
      trace_->add(p.to, "message",
                  "deliver " + p.env.msg.detail() + " from=" + p.from.str());
    if (deliver_) deliver_(p.env);
  }
  return true;
}

bool Network::accessible(SiteId at, SiteId other) const {
  auto it = tables_.find(at);
  return it != tables_.end() && it->second.count(other) > 0;
}

const std::set<SiteId>& Network::site_table(SiteId at) const {
  static const std::set<SiteId> empty;
  auto it = tables_.find(at);
  return it == tables_.end() ? empty : it->second;
}

Counters Network::totals() const {
  Counters t;
  for (const auto& [_, c] : counters_) {
    t.remote += c.remote;
    t.local += c.local;
    t.dropped += c.dropped;
  }
  return t;
}

std::optional<Network::NextEvent> Network::peek() const {
  if (queue_.empty()) return std::nullopt;
  const Pending& p = *queue_.begin();
  NextEvent e;
  e.timer = p.timer;
  e.env = p.env;
  e.pid = p.pid;
  return e;
}

std::vector<std::string> Network::pending_dump() const {
  std::vector<std::string> out;
  for (const auto& p : queue_) {
    std::ostringstream os;
    os << "due=" << p.due << " from=" << p.from.str() << " to=" << p.to.str();
    if (p.timer)
      os << " timer pid=" << p.pid.str();
    else
      os << ' ' << p.env.msg.detail();
    out.push_back(os.str());
  }
  return out;
}

}  // namespace ntx
