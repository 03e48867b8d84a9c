#include "ntx/oracle.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ntx {

namespace {

// A write survives when the writing transaction and every superior of it
// committed; anything else was rolled back somewhere along the way.
bool write_survives(const Engine& eng, const Tid& t) {
  Tid cur = t;
  while (true) {
    auto it = eng.fates().find(cur);
    if (it == eng.fates().end() || it->second != TxnStatus::COMMITTED) return false;
    auto p = cur.parent();
    if (!p) return true;
    cur = *p;
  }
}

Tid top_of(const Tid& t) {
  return Tid::top_level(t.path().front().site, t.path().front().serial);
}

void apply_write(std::vector<std::string>& pages, int page, const std::string& data) {
  if (page < 0 || static_cast<std::size_t>(page) > pages.size())
    throw std::out_of_range("write past end");
  if (static_cast<std::size_t>(page) == pages.size())
    pages.push_back(data);
  else
    pages[static_cast<std::size_t>(page)] = data;
}

}  // namespace

std::map<std::string, std::vector<std::string>> replay_order(
    const Engine& eng, const std::vector<Tid>& order) {
  std::map<std::string, std::vector<std::string>> state;
  for (const auto& fd : eng.scenario().files) state[fd.name] = fd.pages;
  for (const Tid& top : order) {
    for (const auto& w : eng.applied_writes()) {
      if (top_of(w.tid) != top) continue;
      if (!write_survives(eng, w.tid)) continue;
      apply_write(state[w.file], w.page, w.data);
    }
  }
  return state;
}

SerializabilityReport check_serializable(const Engine& eng) {
  SerializabilityReport rep;

  std::vector<Tid> tops;
  for (const auto& [t, fate] : eng.fates())
    if (t.top_level() && fate == TxnStatus::COMMITTED) tops.push_back(t);
  std::sort(tops.begin(), tops.end());

  if (tops.size() > 8) {
    rep.detail = "too many committed top-levels for exhaustive search";
    return rep;
  }

  // Which top-levels delivered a committed state to which replica.  A replica
  // untouched by a given commit keeps whatever it had; the replay below skips
  // that transaction's writes for it.
  std::map<std::pair<std::string, int>, std::set<Tid>> reached;
  for (const auto& a : eng.commit_applies())
    for (SiteId s : a.sites) reached[{a.file, s.ordinal}].insert(top_of(a.tid));

  std::vector<Tid> perm = tops;
  do {
    bool all_match = true;
    // Per-replica replay restricted to the commits that reached it.
    for (const auto& fd : eng.scenario().files) {
      for (SiteId site : fd.replicas) {
        std::vector<std::string> pages = fd.pages;
        const auto* got_set = [&]() -> const std::set<Tid>* {
          auto it = reached.find({fd.name, site.ordinal});
          return it == reached.end() ? nullptr : &it->second;
        }();
        bool possible = true;
        for (const Tid& top : perm) {
          if (!got_set || !got_set->count(top)) continue;
          for (const auto& w : eng.applied_writes()) {
            if (top_of(w.tid) != top) continue;
            if (w.file != fd.name) continue;
            if (!write_survives(eng, w.tid)) continue;
            try {
              apply_write(pages, w.page, w.data);
            } catch (const std::out_of_range&) {
              possible = false;
              break;
            }
          }
          if (!possible) break;
        }
        if (!possible || pages != eng.durable().state(fd.name, site).pages()) {
          all_match = false;
          break;
        }
      }
      if (!all_match) break;
    }
    if (all_match) {
      rep.serializable = true;
      rep.witness = perm;
      return rep;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::ostringstream os;
  os << "no serial order over " << tops.size()
     << " committed top-level transaction(s) reproduces the final replica contents";
  rep.detail = os.str();
  return rep;
}

}  // namespace ntx
