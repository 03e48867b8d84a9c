#include "ntx/messages.hpp"

#include <sstream>

namespace ntx {

const char* to_string(MsgKind k) {
  switch (k) {
    case MsgKind::RELCALL: return "RELCALL";
    case MsgKind::OPEN: return "OPEN";
    case MsgKind::OPENR: return "OPENR";
    case MsgKind::READ: return "READ";
    case MsgKind::READR: return "READR";
    case MsgKind::WRITE: return "WRITE";
    case MsgKind::WRITER: return "WRITER";
    case MsgKind::CLOSE: return "CLOSE";
    case MsgKind::CLOSER: return "CLOSER";
    case MsgKind::FORKREQ: return "FORKREQ";
    case MsgKind::FORKR: return "FORKR";
    case MsgKind::HOMEUPD: return "HOMEUPD";
    case MsgKind::HOMEUPDR: return "HOMEUPDR";
    case MsgKind::RETCODE: return "RETCODE";
    case MsgKind::DESTROY: return "DESTROY";
    case MsgKind::REQCOMMIT: return "REQCOMMIT";
    case MsgKind::GRTCOMMIT: return "GRTCOMMIT";
    case MsgKind::TSSCOMMIT: return "TSSCOMMIT";
    case MsgKind::RTSSCOMMIT: return "RTSSCOMMIT";
    case MsgKind::SUBCOMMIT: return "SUBCOMMIT";
    case MsgKind::SUBCMTFAIL: return "SUBCMTFAIL";
    case MsgKind::FORCEABT: return "FORCEABT";
    case MsgKind::RFORCEABT: return "RFORCEABT";
    case MsgKind::TSSABORT: return "TSSABORT";
    case MsgKind::RTSSABORT: return "RTSSABORT";
    case MsgKind::SUBABORT: return "SUBABORT";
    case MsgKind::TOPABORT: return "TOPABORT";
    case MsgKind::TOPCOMMIT: return "TOPCOMMIT";
    case MsgKind::PREPARE: return "PREPARE";
    case MsgKind::VOTE: return "VOTE";
    case MsgKind::COMMIT: return "COMMIT";
    case MsgKind::ACK: return "ACK";
  }
  return "?";
}

const char* phase_of(MsgKind k) {
  switch (k) {
    case MsgKind::OPEN:
    case MsgKind::OPENR: return "open";
    case MsgKind::READ:
    case MsgKind::READR:
    case MsgKind::WRITE:
    case MsgKind::WRITER: return "data";
    case MsgKind::CLOSE:
    case MsgKind::CLOSER: return "close";
    case MsgKind::REQCOMMIT:
    case MsgKind::GRTCOMMIT:
    case MsgKind::TSSCOMMIT:
    case MsgKind::RTSSCOMMIT:
    case MsgKind::SUBCOMMIT:
    case MsgKind::SUBCMTFAIL:
    case MsgKind::TOPCOMMIT: return "commit";
    case MsgKind::PREPARE:
    case MsgKind::VOTE:
    case MsgKind::COMMIT:
    case MsgKind::ACK: return "2pc";
    case MsgKind::FORCEABT:
    case MsgKind::RFORCEABT:
    case MsgKind::TSSABORT:
    case MsgKind::RTSSABORT:
    case MsgKind::SUBABORT:
    case MsgKind::TOPABORT: return "abort";
    case MsgKind::RELCALL:
    case MsgKind::FORKREQ:
    case MsgKind::FORKR:
    case MsgKind::HOMEUPD:
    case MsgKind::HOMEUPDR:
    case MsgKind::RETCODE:
    case MsgKind::DESTROY: return "control";
  }
  return "?";
}

std::string Message::detail() const {
  std::ostringstream os;
  os << "msg=" << to_string(kind);
  if (!tid.empty()) os << " tid=" << tid.str();
  if (!subject.empty()) os << " subject=" << subject.str();
  if (pid.valid()) os << " pid=" << pid.str();
  if (!file.empty()) os << " file=" << file;
  if (page >= 0) os << " page=" << page;
  if (!files.empty()) {
    os << " files=";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (i) os << ',';
      os << files[i].file << '@' << files[i].tss.str();
    }
  }
  if (!program.empty()) os << " program=" << program;
  switch (kind) {
    case MsgKind::OPENR:
    case MsgKind::FORKR:
    case MsgKind::WRITER:
    case MsgKind::RTSSCOMMIT:
    case MsgKind::VOTE:
      os << " ok=" << (ok ? 1 : 0);
      break;
    case MsgKind::RETCODE:
    case MsgKind::SUBCOMMIT:
    case MsgKind::SUBABORT:
    case MsgKind::TOPABORT:
    case MsgKind::TOPCOMMIT:
      os << " code=" << to_string(code);
      break;
    default:
      break;
  }
  if (!note.empty()) os << " note=" << note;
  return os.str();
}

}  // namespace ntx
