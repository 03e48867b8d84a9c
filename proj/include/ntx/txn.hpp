#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ntx/messages.hpp"
#include "ntx/scenario.hpp"

namespace ntx {

enum class TxnStatus { UNDEFINED, COMMITTED, ABORTED };
const char* to_string(TxnStatus s);

struct Member {
  Pid pid;
  Tid subtrans;                // active subtransaction invoked by this process
  bool sub_committing = false; // set between the child's commit request and its outcome
};

// Commit and abort both run as multi-round conversations; the phase plus the
// await sets are the whole controller state, advanced by replies and by
// topology changes.
enum class TxnPhase {
  RUNNING,
  SUB_WAIT_GRT,    // commit request sent to the parent
  SUB_WAIT_TSS,    // lock inheritance fanned out, awaiting replies
  TOP_WAIT_TSS,    // same, top-level
  TOP_WAIT_VOTES,  // prepare fanned out
  TOP_WAIT_ACKS,   // commit point passed, applying durably
  ABORT_WAIT_CHILDREN,
  ABORT_WAIT_TSS,
};

struct TransRecord {
  Tid tid;
  TxnStatus status = TxnStatus::UNDEFINED;
  Pid caller;    // process that invoked this transaction
  Pid top_proc;  // the process created to run it
  std::vector<Member> members;
  std::vector<ParticipantFile> files;  // one entry per (file, TSS)

  TxnPhase phase = TxnPhase::RUNNING;
  std::set<SiteId> await_sites;
  std::set<Tid> await_children;
  bool commit_failed = false;
  // When the abort was demanded by the parent, completion answers with
  // RFORCEABT instead of notifying the caller.
  bool reply_forceabt = false;
  SiteId forceabt_site;
  bool caller_notified = false;

  Member* find_member(const Pid& p);
  void add_member(const Pid& p);
  void remove_member(const Pid& p);
  // Deduplicates on (file, TSS); WRITE wins over READ.
  void add_file(const ParticipantFile& f);
  bool aborting() const {
    return phase == TxnPhase::ABORT_WAIT_CHILDREN || phase == TxnPhase::ABORT_WAIT_TSS;
  }
};

// One process may invoke only one subtransaction at a time.
bool can_invoke(const Member& m);

struct Process {
  Pid pid;
  SiteId site;
  std::string name;
  Tid txn;        // empty for plain driver processes
  bool top = false;
  Pid parent_proc;
  const Script* script = nullptr;
  std::size_t ip = 0;
  bool halted = false;

  enum class Wait { NONE, OPENR, READR, WRITER, CLOSER, RELCALL, HOMEUPDR, CHILD, RETRY };
  Wait wait = Wait::NONE;
  SiteId wait_site;
  Tid wait_sub;
  Pid wait_child;

  std::vector<CompletionCode> codes;  // one per relcall, in order
  bool ok_so_far = true;
  std::deque<Pid> children;           // forked and not yet waited on
  std::map<Pid, bool> child_codes;

  std::map<std::string, SiteId> open_tss;  // file -> TSS used
  // (file, tss ordinal, write?) already entered in the home participant list
  std::set<std::tuple<std::string, int, bool>> registered;

  struct PendingOpen {
    std::string file;
    LockMode mode{};
    SiteId tss;
  };
  std::optional<PendingOpen> pending_open;
  struct PendingRelcall {
    Tid tid;
    std::string program;
    SiteId site;
  };
  std::optional<PendingRelcall> pending_relcall;
  int retries_left = 0;
};

}  // namespace ntx
