#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ntx/ids.hpp"

namespace ntx {

// Immutable snapshot of one file's contents.  A write produces a new value
// that shares every unmodified page with its base, so saving a snapshot is a
// pointer copy no matter how large the file is.  Pages are dense: index
// page_count() may be written to append, anything beyond that is a gap.
class FileState {
 public:
  FileState();  // zero pages, version 0
  static FileState from_pages(const std::vector<std::string>& pages);

  std::size_t page_count() const;
  const std::string& page(std::size_t idx) const;  // throws std::out_of_range
  FileState with_page(std::size_t idx, std::string content) const;

  // Monotone within one derivation chain; used only for trace labels.
  int version() const;

  std::uint64_t content_hash() const;
  bool same_content(const FileState& other) const;
  std::vector<std::string> pages() const;

 private:
  struct Rep {
    std::vector<std::shared_ptr<const std::string>> pages;
    int version = 0;
  };
  explicit FileState(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}
  std::shared_ptr<const Rep> rep_;
};

// Explicit snapshot operation; the copy is O(1) and later writes to either
// value never affect the other.
inline FileState snapshot(const FileState& s) { return s; }

struct FileMeta {
  std::string name;
  std::vector<SiteId> replicas;
  std::vector<std::string> initial_pages;
};

// Durable log records kept per site for atomic commitment.  The log is
// append-only; a prepared record is superseded by a later resolve record for
// the same transaction rather than rewritten.
struct LogRecord {
  enum class Kind { PREPARED, COMMIT_POINT, RESOLVED };
  Kind kind{};
  Tid tid;
  std::string file;       // PREPARED / RESOLVED
  FileState state;        // PREPARED
  bool committed = false; // RESOLVED: applied (true) or discarded (false)
};

// Committed storage for every (file, site) replica plus the per-site commit
// logs.  Nothing here changes outside of commit application and log appends;
// all transient state lives in the lock tables.
class DurableStore {
 public:
  void add_replica(const std::string& file, SiteId site, const FileState& initial);
  bool has_replica(const std::string& file, SiteId site) const;
  const FileState& state(const std::string& file, SiteId site) const;

  // Applies a committed state to one replica.  Returns the number of pages
  // that actually differed, which is also added to the site's write counter.
  // Throws if the site does not store the file.
  int apply_committed(const std::string& file, SiteId site, const FileState& s);

  long page_writes(SiteId site) const;
  long total_page_writes() const;

  // Hash over replica contents only; log appends do not disturb it.
  std::uint64_t content_hash() const;

  void log_prepared(SiteId site, const Tid& t, const std::string& file,
                    const FileState& state);
  void log_commit_point(SiteId site, const Tid& t);
  void log_resolved(SiteId site, const Tid& t, const std::string& file,
                    bool committed);

  bool has_commit_point(SiteId site, const Tid& t) const;
  // Prepared records at `site` with no matching resolve record.
  std::vector<LogRecord> unresolved_prepared(SiteId site) const;
  // True while some transaction holds an unresolved prepared record for the
  // file at this site; the copy's fate is undecided and it must not be
  // handed out.
  bool in_doubt(const std::string& file, SiteId site) const;

  const std::vector<LogRecord>& log(SiteId site) const;

 private:
  std::map<std::pair<std::string, int>, FileState> replicas_;
  std::map<int, long> page_writes_;
  std::map<int, std::vector<LogRecord>> logs_;
  static const std::vector<LogRecord> kEmptyLog;
};

}  // namespace ntx
