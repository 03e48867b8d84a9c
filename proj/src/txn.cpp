#include "ntx/txn.hpp"

#include <algorithm>

namespace ntx {

const char* to_string(TxnStatus s) {
  switch (s) {
    case TxnStatus::UNDEFINED: return "UNDEFINED";
    case TxnStatus::COMMITTED: return "COMMITTED";
    case TxnStatus::ABORTED: return "ABORTED";
  }
  return "?";
}

Member* TransRecord::find_member(const Pid& p) {
  for (auto& m : members)
    if (m.pid == p) return &m;
  return nullptr;
}

void TransRecord::add_member(const Pid& p) {
  if (!find_member(p)) members.push_back(Member{p, Tid{}, false});
}

void TransRecord::remove_member(const Pid& p) {
  members.erase(std::remove_if(members.begin(), members.end(),
                               [&](const Member& m) { return m.pid == p; }),
                members.end());
}

void TransRecord::add_file(const ParticipantFile& f) {
  for (auto& e : files) {
    if (e.file == f.file && e.tss == f.tss) {
      if (f.mode == LockMode::WRITE) e.mode = LockMode::WRITE;
      return;
    }
  }
  files.push_back(f);
}

bool can_invoke(const Member& m) { return m.subtrans.empty() && !m.sub_committing; }

}  // namespace ntx
