#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ntx/filestore.hpp"
#include "ntx/ids.hpp"
#include "ntx/trace.hpp"

namespace ntx {

struct ReadHolderEntry {
  Tid tid;
  std::set<SiteId> using_sites;
};

struct WriteHolderEntry {
  Tid tid;
  FileState saved;  // state when the write lock was granted
  std::set<SiteId> using_sites;
};

struct StackEntry {
  Tid tid;
  FileState saved;  // state to restore if this retainer's line aborts
};

// Lock and recovery record for one physical file copy, kept at the copy's
// synchronization site.  The write-retainer stack holds one entry per level
// of committed-but-not-yet-durable work: entry tids strictly deepen from
// bottom to top, and each saved state is the file as it was before that
// level's changes.
struct TLock {
  FileState current;
  std::vector<ReadHolderEntry> read_holders;  // empty while write_holder is set
  std::optional<WriteHolderEntry> write_holder;
  std::vector<Tid> read_retainers;
  std::vector<StackEntry> write_retainers;  // back() is the top

  // Set once a top-level commit has folded the stack away and the copy is
  // waiting for durable application; new opens are refused until resolved.
  std::optional<Tid> commit_pending;

  bool no_holders() const { return read_holders.empty() && !write_holder; }
  bool no_retainers() const {
    return read_retainers.empty() && write_retainers.empty();
  }
  bool unused() const { return no_holders() && no_retainers() && !commit_pending; }

  bool holds_read(const Tid& t) const;
  bool holds_write(const Tid& t) const;
  bool retains_read(const Tid& t) const;
  bool in_stack(const Tid& t) const;

  std::uint64_t state_hash() const;
};

struct OpenOutcome {
  bool granted = false;
  std::string reason;  // denial cause
};

enum class AccessStatus { OK, DENIED, BAD_PAGE };

struct ReadOutcome {
  AccessStatus status = AccessStatus::DENIED;
  std::string content;
};

// All t-locks managed by one site in its synchronization-site role.  The
// operations are pure state transitions plus trace output; message handling
// lives with the caller.
class LockTable {
 public:
  LockTable() = default;
  LockTable(SiteId site, Trace* trace) : site_(site), trace_(trace) {}

  // Grant rules: a write lock needs no other holder and every retainer an
  // ancestor of t; a read lock needs no other write holder and every write
  // retainer an ancestor of t.  A transaction whose superior chain or using
  // site is unreachable from this site is refused outright, as is any file
  // copy frozen by a pending top-level commit.
  OpenOutcome tss_open(const std::string& file, const FileState& durable_initial,
                       const Tid& t, LockMode mode, SiteId using_site,
                       const std::set<SiteId>& accessible);

  // Held becomes retained: a closing reader joins the read retainers unless
  // already retained either way; a closing writer pushes (t, saved) unless
  // its entry is already on top.  Close for a non-holder is a stale message
  // and is ignored.
  void tss_close(const std::string& file, const Tid& t);

  // Commit of t: surviving lock state passes to the parent.  Any leftover
  // inferior state (aborted or orphaned descendants that were never swept)
  // is cleaned out first exactly as an abort of those inferiors would.
  void tss_commit(const std::string& file, const Tid& t);

  // Abort of t: t's own state and every inferior's state is discarded, and
  // the file reverts to the deepest saved state that was popped.  Safe to
  // call repeatedly and when t never locked the file.
  void tss_abort(const std::string& file, const Tid& t);

  // Removes every trace of transactions that can no longer reach this site:
  // holders (by chain or using site), read retainers, and the contiguous run
  // of stack entries from the bottommost unreachable retainer upward.
  void orphan_sweep(const std::string& file, const std::set<SiteId>& accessible);
  void orphan_sweep_all(const std::set<SiteId>& accessible);

  // Data access runs against the copy's current state and requires a live
  // hold in a sufficient mode; a miss means the request is stale.
  ReadOutcome read_page(const std::string& file, const Tid& t, std::size_t idx);
  AccessStatus write_page(const std::string& file, const Tid& t, std::size_t idx,
                          const std::string& content);

  TLock* find(const std::string& file);
  const TLock* find(const std::string& file) const;
  bool has(const std::string& file) const { return locks_.count(file) > 0; }
  void discard(const std::string& file);
  std::size_t lock_count() const { return locks_.size(); }
  std::vector<std::string> files() const;
  std::uint64_t table_hash() const;

 private:
  TLock& get_or_create(const std::string& file, const FileState& initial);
  void drop_if_unused(const std::string& file);
  void force_close_read(const std::string& file, TLock& l, Tid t);
  void force_close_write(const std::string& file, TLock& l);
  void trace(const std::string& kind, const std::string& detail);

  SiteId site_;
  Trace* trace_ = nullptr;
  std::map<std::string, TLock> locks_;
};

// True when every home site on t's path is in the accessible set.
bool chain_accessible(const Tid& t, const std::set<SiteId>& accessible);

}  // namespace ntx
