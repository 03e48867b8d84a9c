#include "ntx/tlock.hpp"

#include <algorithm>
#include <sstream>

namespace ntx {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

bool TLock::holds_read(const Tid& t) const {
  for (const auto& h : read_holders)
    if (h.tid == t) return true;
  return false;
}

bool TLock::holds_write(const Tid& t) const {
  return write_holder && write_holder->tid == t;
}

bool TLock::retains_read(const Tid& t) const {
  return std::find(read_retainers.begin(), read_retainers.end(), t) !=
         read_retainers.end();
}

bool TLock::in_stack(const Tid& t) const {
  for (const auto& e : write_retainers)
    if (e.tid == t) return true;
  return false;
}

std::uint64_t TLock::state_hash() const {
  std::uint64_t h = current.content_hash();
  for (const auto& rh : read_holders) {
    h = mix(h, hash_str("rh:" + rh.tid.str()));
    for (SiteId s : rh.using_sites) h = mix(h, s.ordinal);
  }
  if (write_holder) {
    h = mix(h, hash_str("wh:" + write_holder->tid.str()));
    h = mix(h, write_holder->saved.content_hash());
    for (SiteId s : write_holder->using_sites) h = mix(h, s.ordinal);
  }
  for (const auto& rr : read_retainers) h = mix(h, hash_str("rr:" + rr.str()));
  for (const auto& e : write_retainers) {
    h = mix(h, hash_str("wr:" + e.tid.str()));
    h = mix(h, e.saved.content_hash());
  }
  if (commit_pending) h = mix(h, hash_str("cp:" + commit_pending->str()));
  return h;
}

bool chain_accessible(const Tid& t, const std::set<SiteId>& accessible) {
  for (SiteId s : chain_sites(t))
    if (!accessible.count(s)) return false;
  return true;
}

void LockTable::trace(const std::string& kind, const std::string& detail) {
  if (trace_) trace_->add(site_, kind, detail);
}

TLock& LockTable::get_or_create(const std::string& file, const FileState& initial) {
  auto it = locks_.find(file);
  if (it == locks_.end()) {
    TLock l;
    l.current = snapshot(initial);
    it = locks_.emplace(file, std::move(l)).first;
  }
  return it->second;
}

void LockTable::drop_if_unused(const std::string& file) {
  auto it = locks_.find(file);
  if (it != locks_.end() && it->second.unused()) locks_.erase(it);
}

TLock* LockTable::find(const std::string& file) {
  auto it = locks_.find(file);
  return it == locks_.end() ? nullptr : &it->second;
}

const TLock* LockTable::find(const std::string& file) const {
  auto it = locks_.find(file);
  return it == locks_.end() ? nullptr : &it->second;
}

void LockTable::discard(const std::string& file) { locks_.erase(file); }

std::vector<std::string> LockTable::files() const {
  std::vector<std::string> out;
  out.reserve(locks_.size());
  for (const auto& [f, _] : locks_) out.push_back(f);
  return out;
}

std::uint64_t LockTable::table_hash() const {
  std::uint64_t h = 0;
  for (const auto& [f, l] : locks_) {
    h = mix(h, hash_str(f));
    h = mix(h, l.state_hash());
  }
  return h;
}

OpenOutcome LockTable::tss_open(const std::string& file,
                                const FileState& durable_initial, const Tid& t,
                                LockMode mode, SiteId using_site,
                                const std::set<SiteId>& accessible) {
  std::ostringstream ctx;
  ctx << "open file=" << file << " tid=" << t.str() << " mode=" << to_string(mode)
      << " us=" << using_site.str();

  auto deny = [&](const std::string& reason) {
    trace("denial", ctx.str() + " reason=" + reason);
    return OpenOutcome{false, reason};
  };

  // A request whose transaction chain or using site cannot reach this site
  // belongs to an orphan (or is about to become one); granting it would
  // outlive the sweep that removes such transactions.
  if (!accessible.count(using_site)) return deny("unreachable-us");
  if (!chain_accessible(t, accessible)) return deny("unreachable-chain");

  TLock* existing = find(file);
  if (existing && existing->commit_pending) return deny("commit-pending");

  if (existing) {
    TLock& l = *existing;
    if (mode == LockMode::WRITE) {
      if (l.holds_write(t)) {
        l.write_holder->using_sites.insert(using_site);
        trace("grant", ctx.str() + " note=already-held");
        return {true, {}};
      }
      for (const auto& rh : l.read_holders)
        if (rh.tid != t) return deny("holder-conflict");
      if (l.write_holder) return deny("holder-conflict");  // t never here
      for (const auto& rr : l.read_retainers)
        if (!is_ancestor(rr, t)) return deny("retainer-conflict");
      for (const auto& e : l.write_retainers)
        if (!is_ancestor(e.tid, t)) return deny("retainer-conflict");
      // Possible upgrade: t may be the sole read holder.
      std::set<SiteId> use{using_site};
      for (auto it = l.read_holders.begin(); it != l.read_holders.end();) {
        if (it->tid == t) {
          use.insert(it->using_sites.begin(), it->using_sites.end());
          it = l.read_holders.erase(it);
        } else {
          ++it;
        }
      }
      l.write_holder = WriteHolderEntry{t, snapshot(l.current), std::move(use)};
      trace("grant", ctx.str());
      return {true, {}};
    }
    // READ
    if (l.write_holder) {
      if (l.write_holder->tid == t) {
        l.write_holder->using_sites.insert(using_site);
        trace("grant", ctx.str() + " note=write-held");
        return {true, {}};
      }
      return deny("holder-conflict");
    }
    for (const auto& e : l.write_retainers)
      if (!is_ancestor(e.tid, t)) return deny("retainer-conflict");
    for (auto& rh : l.read_holders)
      if (rh.tid == t) {
        rh.using_sites.insert(using_site);
        trace("grant", ctx.str() + " note=already-held");
        return {true, {}};
      }
    l.read_holders.push_back(ReadHolderEntry{t, {using_site}});
    trace("grant", ctx.str());
    return {true, {}};
  }

  // First use of this copy: load the committed state and grant freely.
  TLock& l = get_or_create(file, durable_initial);
  if (mode == LockMode::WRITE)
    l.write_holder = WriteHolderEntry{t, snapshot(l.current), {using_site}};
  else
    l.read_holders.push_back(ReadHolderEntry{t, {using_site}});
  trace("grant", ctx.str() + " note=new-tlock");
  return {true, {}};
}

void LockTable::tss_close(const std::string& file, const Tid& t) {
  TLock* lp = find(file);
  if (!lp) {
    trace("sweep", "close-ignored file=" + file + " tid=" + t.str() + " reason=no-tlock");
    return;
  }
  TLock& l = *lp;

  for (auto it = l.read_holders.begin(); it != l.read_holders.end(); ++it) {
    if (it->tid == t) {
      l.read_holders.erase(it);
      if (!l.retains_read(t) && !l.in_stack(t)) {
        l.read_retainers.push_back(t);
        trace("grant", "retain file=" + file + " tid=" + t.str() + " mode=read");
      }
      return;
    }
  }

  if (l.write_holder && l.write_holder->tid == t) {
    if (l.write_retainers.empty() || l.write_retainers.back().tid != t) {
      std::ostringstream os;
      os << "file=" << file << " tid=" << t.str() << " saved=v"
         << l.write_holder->saved.version();
      l.write_retainers.push_back(StackEntry{t, l.write_holder->saved});
      trace("push", os.str());
    }
    auto rr = std::find(l.read_retainers.begin(), l.read_retainers.end(), t);
    if (rr != l.read_retainers.end()) l.read_retainers.erase(rr);
    l.write_holder.reset();
    return;
  }

  trace("sweep", "close-ignored file=" + file + " tid=" + t.str() + " reason=not-holder");
}

void LockTable::force_close_read(const std::string& file, TLock& l, Tid t) {
  for (auto it = l.read_holders.begin(); it != l.read_holders.end(); ++it)
    if (it->tid == t) {
      // The holder is gone for good; it does not join the retainers.
      l.read_holders.erase(it);
      trace("sweep", "force-close file=" + file + " tid=" + t.str() + " mode=read");
      return;
    }
}

void LockTable::force_close_write(const std::string& file, TLock& l) {
  if (!l.write_holder) return;
  Tid t = l.write_holder->tid;
  if (l.write_retainers.empty() || l.write_retainers.back().tid != t) {
    std::ostringstream os;
    os << "file=" << file << " tid=" << t.str() << " saved=v"
       << l.write_holder->saved.version();
    l.write_retainers.push_back(StackEntry{t, l.write_holder->saved});
    trace("push", os.str());
  }
  auto rr = std::find(l.read_retainers.begin(), l.read_retainers.end(), t);
  if (rr != l.read_retainers.end()) l.read_retainers.erase(rr);
  l.write_holder.reset();
  trace("sweep", "force-close file=" + file + " tid=" + t.str() + " mode=write");
}

void LockTable::tss_commit(const std::string& file, const Tid& t) {
  TLock* lp = find(file);
  if (!lp) return;
  TLock& l = *lp;

  // Commit implies close: a hold t never gave back is retired now.
  if (l.holds_read(t) || l.holds_write(t)) tss_close(file, t);

  // Leftovers from inferiors that aborted (or vanished) without being swept
  // are undone first, exactly as their own abort would have done.
  for (std::size_t i = l.read_holders.size(); i-- > 0;)
    if (is_superior(t, l.read_holders[i].tid))
      force_close_read(file, l, l.read_holders[i].tid);
  if (l.write_holder && is_superior(t, l.write_holder->tid))
    force_close_write(file, l);
  for (auto it = l.read_retainers.begin(); it != l.read_retainers.end();)
    it = is_superior(t, *it) ? l.read_retainers.erase(it) : std::next(it);
  // Entries of unrelated transactions must never be popped: only act on the
  // stack when t itself (or an inferior) is actually on it.
  bool involved = false;
  for (const auto& e : l.write_retainers)
    if (is_ancestor(t, e.tid)) involved = true;
  bool popped_any = false;
  FileState deepest;
  while (involved && !l.write_retainers.empty() &&
         !is_ancestor(l.write_retainers.back().tid, t)) {
    StackEntry e = l.write_retainers.back();
    l.write_retainers.pop_back();
    deepest = e.saved;
    popped_any = true;
    trace("pop", "file=" + file + " tid=" + e.tid.str() + " cause=inferior-cleanup");
  }
  if (popped_any) {
    l.current = deepest;
    std::ostringstream os;
    os << "file=" << file << " state=v" << l.current.version();
    trace("restore", os.str());
  }

  if (l.retains_read(t)) {
    l.read_retainers.erase(
        std::find(l.read_retainers.begin(), l.read_retainers.end(), t));
    if (auto parent = t.parent()) {
      if (!l.retains_read(*parent) && !l.in_stack(*parent)) {
        l.read_retainers.push_back(*parent);
        trace("grant", "retain file=" + file + " tid=" + parent->str() +
                           " mode=read cause=commit");
      }
    }
    drop_if_unused(file);
    return;
  }

  if (!l.write_retainers.empty() && l.write_retainers.back().tid == t) {
    if (auto parent = t.parent()) {
      if (l.in_stack(*parent)) {
        l.write_retainers.pop_back();
        trace("pop", "file=" + file + " tid=" + t.str() + " cause=commit-merge");
      } else {
        StackEntry& top = l.write_retainers.back();
        std::ostringstream os;
        os << "file=" << file << " tid=" << t.str() << " relabeled=" << parent->str()
           << " saved=v" << top.saved.version();
        top.tid = *parent;
        // Write retention subsumes read retention: one entry per transaction.
        auto rr = std::find(l.read_retainers.begin(), l.read_retainers.end(), *parent);
        if (rr != l.read_retainers.end()) l.read_retainers.erase(rr);
        trace("pop", os.str() + " cause=commit-inherit");
      }
    } else {
      l.write_retainers.pop_back();
      trace("pop", "file=" + file + " tid=" + t.str() + " cause=top-commit");
      // The surviving state now waits for durable application; the copy is
      // unavailable until the commit protocol resolves it.
      l.commit_pending = t;
    }
    return;
  }
}

void LockTable::tss_abort(const std::string& file, const Tid& t) {
  TLock* lp = find(file);
  if (!lp) return;
  TLock& l = *lp;

  for (std::size_t i = l.read_holders.size(); i-- > 0;)
    if (is_ancestor(t, l.read_holders[i].tid))
      force_close_read(file, l, l.read_holders[i].tid);
  if (l.write_holder && is_ancestor(t, l.write_holder->tid))
    force_close_write(file, l);
  for (auto it = l.read_retainers.begin(); it != l.read_retainers.end();)
    it = is_ancestor(t, *it) ? l.read_retainers.erase(it) : std::next(it);

  // An abort can reach a lock its transaction never actually acquired (the
  // open may have been denied after the file joined the abort fan-out).
  // Entries of unrelated transactions must stay put.
  bool involved = false;
  for (const auto& e : l.write_retainers)
    if (is_ancestor(t, e.tid)) involved = true;
  bool popped_any = false;
  FileState deepest;
  while (involved && !l.write_retainers.empty() &&
         !is_superior(l.write_retainers.back().tid, t)) {
    StackEntry e = l.write_retainers.back();
    l.write_retainers.pop_back();
    deepest = e.saved;
    popped_any = true;
    trace("pop", "file=" + file + " tid=" + e.tid.str() + " cause=abort");
  }
  if (popped_any) {
    l.current = deepest;
    std::ostringstream os;
    os << "file=" << file << " state=v" << l.current.version();
    trace("restore", os.str());
  }

  if (l.commit_pending && *l.commit_pending == t) l.commit_pending.reset();
  drop_if_unused(file);
}

void LockTable::orphan_sweep(const std::string& file,
                             const std::set<SiteId>& accessible) {
  TLock* lp = find(file);
  if (!lp) return;
  TLock& l = *lp;

  auto holder_unreachable = [&](const Tid& t, const std::set<SiteId>& using_sites) {
    if (!chain_accessible(t, accessible)) return true;
    for (SiteId s : using_sites)
      if (!accessible.count(s)) return true;
    return false;
  };

  for (std::size_t i = l.read_holders.size(); i-- > 0;) {
    const auto& rh = l.read_holders[i];
    if (holder_unreachable(rh.tid, rh.using_sites))
      force_close_read(file, l, rh.tid);
  }
  if (l.write_holder &&
      holder_unreachable(l.write_holder->tid, l.write_holder->using_sites))
    force_close_write(file, l);

  for (auto it = l.read_retainers.begin(); it != l.read_retainers.end();) {
    if (!chain_accessible(*it, accessible)) {
      trace("sweep", "drop-read-retainer file=" + file + " tid=" + it->str());
      it = l.read_retainers.erase(it);
    } else {
      ++it;
    }
  }

  // Find the bottommost retainer cut off from this site; everything from it
  // upward is invalidated, and the file reverts to the state saved when that
  // retainer first acquired the lock.
  std::optional<Tid> located;
  for (const auto& e : l.write_retainers) {
    if (!chain_accessible(e.tid, accessible)) {
      located = e.tid;
      break;
    }
  }
  if (located) {
    bool popped_any = false;
    FileState deepest;
    while (!l.write_retainers.empty() &&
           !is_superior(l.write_retainers.back().tid, *located)) {
      StackEntry e = l.write_retainers.back();
      l.write_retainers.pop_back();
      deepest = e.saved;
      popped_any = true;
      trace("pop", "file=" + file + " tid=" + e.tid.str() + " cause=orphan-sweep");
    }
    if (popped_any) {
      l.current = deepest;
      std::ostringstream os;
      os << "file=" << file << " state=v" << l.current.version();
      trace("restore", os.str());
    }
  }

  if (l.commit_pending && !chain_accessible(*l.commit_pending, accessible)) {
    trace("sweep", "drop-commit-pending file=" + file + " tid=" +
                       l.commit_pending->str());
    l.commit_pending.reset();
  }

  drop_if_unused(file);
}

void LockTable::orphan_sweep_all(const std::set<SiteId>& accessible) {
  for (const auto& f : files()) orphan_sweep(f, accessible);
}

ReadOutcome LockTable::read_page(const std::string& file, const Tid& t,
                                 std::size_t idx) {
  TLock* lp = find(file);
  if (!lp || (!lp->holds_read(t) && !lp->holds_write(t)))
    return {AccessStatus::DENIED, {}};
  if (idx >= lp->current.page_count()) return {AccessStatus::BAD_PAGE, {}};
  return {AccessStatus::OK, lp->current.page(idx)};
}

AccessStatus LockTable::write_page(const std::string& file, const Tid& t,
                                   std::size_t idx, const std::string& content) {
  TLock* lp = find(file);
  if (!lp || !lp->holds_write(t)) return AccessStatus::DENIED;
  if (idx > lp->current.page_count()) return AccessStatus::BAD_PAGE;
  lp->current = lp->current.with_page(idx, content);
  return AccessStatus::OK;
}

}  // namespace ntx
