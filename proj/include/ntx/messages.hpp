#pragma once

#include <string>
#include <vector>

#include "ntx/ids.hpp"

namespace ntx {

// Wire vocabulary.  Request/reply pairs share a prefix (OPEN/OPENR and so
// on).  RELCALL, HOMEUPD(R), RETCODE and DESTROY carry invocation plumbing
// and home-site record updates for members running away from the home site.
enum class MsgKind {
  RELCALL,
  OPEN, OPENR, READ, READR, WRITE, WRITER, CLOSE, CLOSER,
  FORKREQ, FORKR, HOMEUPD, HOMEUPDR, RETCODE, DESTROY,
  REQCOMMIT, GRTCOMMIT, TSSCOMMIT, RTSSCOMMIT, SUBCOMMIT, SUBCMTFAIL,
  FORCEABT, RFORCEABT, TSSABORT, RTSSABORT, SUBABORT, TOPABORT, TOPCOMMIT,
  PREPARE, VOTE, COMMIT, ACK,
};

const char* to_string(MsgKind k);

// Protocol phase a message belongs to, the key for the metric counters.
const char* phase_of(MsgKind k);

enum class HomeUpdKind { ADD_FILE, SET_SUBTRANS, CLEAR_SUBTRANS, MEMBER_EXIT, ABORT_REQUEST };

struct ParticipantFile {
  std::string file;
  SiteId tss;
  LockMode mode{};
  auto operator<=>(const ParticipantFile&) const = default;
};

struct Message {
  MsgKind kind{};
  Tid tid;           // subject transaction
  Tid subject;       // secondary transaction (forced child, pending subtrans)
  Pid pid;           // requesting or affected process
  Pid pid2;          // secondary process (fork parent, wait target)

  std::string file;
  LockMode mode{};
  int page = -1;
  std::string data;

  std::vector<ParticipantFile> files;

  std::string program;     // RELCALL: script to run
  CompletionCode code{};
  bool ok = false;
  HomeUpdKind upd{};
  std::string note;        // denial reason and the like

  std::string detail() const;  // stable trace text
};

}  // namespace ntx
