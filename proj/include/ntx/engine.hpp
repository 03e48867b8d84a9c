#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntx/filestore.hpp"
#include "ntx/net.hpp"
#include "ntx/scenario.hpp"
#include "ntx/tlock.hpp"
#include "ntx/trace.hpp"
#include "ntx/txn.hpp"

namespace ntx {

struct LivelockError : std::runtime_error {
  explicit LivelockError(const std::string& what) : std::runtime_error(what) {}
};

// Couples the scheduler, the lock tables, the durable store and the scripted
// processes into one closed simulation. run() drives it to quiescence while
// firing scripted faults in declaration order.
class Engine {
 public:
  struct Options {
    bool check_invariants = false;
  };

  Engine(const Scenario& sc, Trace* trace);
  Engine(const Scenario& sc, Trace* trace, Options opt);

  void run();

  // Observation side.
  const Scenario& scenario() const { return sc_; }
  Network& net() { return *net_; }
  const Network& net() const { return *net_; }
  DurableStore& durable() { return durable_; }
  const DurableStore& durable() const { return durable_; }
  const LockTable& locks(SiteId s) const;
  const std::map<Tid, TxnStatus>& fates() const { return fates_; }
  const Process* process_by_name(const std::string& name) const;
  const TransRecord* find_record(const Tid& t) const;
  std::size_t record_count() const;

  struct AppliedWrite {
    long order = 0;
    Tid tid;
    std::string file;
    int page = 0;
    std::string data;
  };
  const std::vector<AppliedWrite>& applied_writes() const { return writes_; }

  struct CommitApply {
    long order = 0;
    Tid tid;
    std::string file;
    std::vector<SiteId> sites;
  };
  const std::vector<CommitApply>& commit_applies() const { return applies_; }

  // Consistency findings collected while running (always-on checks).
  const std::vector<std::string>& violations() const { return violations_; }
  // State that can make no further progress, evaluated once quiescent.
  std::vector<std::string> quiescence_violations() const;

  long counter(const std::string& name) const;

 private:
  struct SiteState {
    std::unique_ptr<LockTable> locks;
    std::map<Tid, TransRecord> records;
    int tid_serial = 0;
    int pid_serial = 0;
  };

  // wiring
  void deliver(const Envelope& env);
  void on_timer(const Pid& pid);
  void on_topology_change(SiteId s);
  bool fire_due_faults();
  void apply_partition(const Fault& f);

  // process engine
  Pid new_pid(SiteId s);
  Process& make_process(SiteId s, const std::string& name, const Tid& txn,
                        const Script* script, const Pid& parent);
  Process* find_proc(const Pid& p);
  void schedule_proc(const Pid& p, long delay = 1);
  void proc_step(const Pid& p);
  void resume(Process& pr);
  void op_relcall(Process& pr, const ScriptOp& op);
  void op_fork(Process& pr, const ScriptOp& op);
  void op_wait(Process& pr);
  void op_open(Process& pr, const ScriptOp& op);
  void attempt_open(Process& pr);
  void op_data(Process& pr, const ScriptOp& op);
  void op_close(Process& pr, const ScriptOp& op);
  void do_exit(Process& pr, bool ok);
  void hard_fail(Process& pr, const std::string& why);
  void destroy_process(const Pid& p, const std::string& why);
  void deliver_completion(const Pid& p, const Tid& sub, CompletionCode code);
  void deliver_child_code(const Pid& parent, const Pid& child, bool ok);
  void send_relcall(Process& pr);

  // home-site duties
  TransRecord* record_at(SiteId home, const Tid& t);
  void exit_member(SiteId home, const Tid& t, const Pid& p, bool ok);
  void request_abort(SiteId from, const Tid& t);
  // Fan-out that tolerates the record completing mid-loop: synchronous local
  // replies can finish the conversation before the last message goes out.
  // Takes the tid by value because the record holding it may be freed by a
  // reentrant delivery.
  void guarded_sends(SiteId home, Tid tid,
                     const std::vector<std::pair<SiteId, Message>>& outs);

  // commit / abort controllers
  void subtransaction_commit(TransRecord& r);
  void toplevel_commit(TransRecord& r);
  void finish_subcommit(TransRecord& r, bool ok);
  void start_prepare(TransRecord& r);
  void top_commit_point(TransRecord& r);
  void top_abort_decision(TransRecord& r, const std::string& why);
  void abort_transaction(TransRecord& r, const std::string& why);
  void abort_enter_tss_phase(TransRecord& r);
  void abort_completion(TransRecord& r);
  void remove_record(SiteId home, const Tid& t);

  // message handlers
  void h_relcall(const Envelope& e);
  void h_open(const Envelope& e);
  void h_openr(const Envelope& e);
  void h_read(const Envelope& e);
  void h_readr(const Envelope& e);
  void h_write(const Envelope& e);
  void h_writer(const Envelope& e);
  void h_close(const Envelope& e);
  void h_closer(const Envelope& e);
  void h_forkreq(const Envelope& e);
  void h_forkr(const Envelope& e);
  void h_homeupd(const Envelope& e);
  void h_homeupdr(const Envelope& e);
  void h_retcode(const Envelope& e);
  void h_destroy(const Envelope& e);
  void h_reqcommit(const Envelope& e);
  void h_grtcommit(const Envelope& e);
  void h_tsscommit(const Envelope& e);
  void h_rtsscommit(const Envelope& e);
  void h_subcommit(const Envelope& e);
  void h_subcmtfail(const Envelope& e);
  void h_forceabt(const Envelope& e);
  void h_rforceabt(const Envelope& e);
  void h_tssabort(const Envelope& e);
  void h_rtssabort(const Envelope& e);
  void h_subabort(const Envelope& e);
  void h_topabort(const Envelope& e);
  void h_topcommit(const Envelope& e);
  void h_prepare(const Envelope& e);
  void h_vote(const Envelope& e);
  void h_commit(const Envelope& e);
  void h_ack(const Envelope& e);

  // topology-change procedure, in order
  void orphan_sweep_home(SiteId s);
  void notify_waiters(SiteId s);
  void abort_on_inaccessible_storage(SiteId s);
  void resolve_in_doubt(SiteId s);
  void silent_abort(SiteId s, TransRecord& r, const std::string& why);

  void apply_commit_at(SiteId s, const Tid& t, const std::string& file,
                       const FileState& state, const char* how);
  void set_status(TransRecord& r, TxnStatus st, const std::string& why);
  bool accessible(SiteId at, SiteId other) const;
  void send(SiteId from, SiteId to, Message m);
  void trace(SiteId s, const std::string& kind, const std::string& detail);

  const Scenario sc_;
  Trace* tr_;
  Options opt_;
  std::unique_ptr<Network> net_;
  DurableStore durable_;
  std::map<SiteId, SiteState> sites_;
  std::map<Pid, Process> procs_;
  std::map<std::string, Pid> procs_by_name_;
  std::map<Tid, TxnStatus> fates_;
  std::vector<AppliedWrite> writes_;
  std::vector<CommitApply> applies_;
  std::vector<std::string> violations_;
  std::vector<Fault> fault_queue_;
  std::size_t next_fault_ = 0;
  std::set<std::pair<std::string, int>> vote_no_;  // (file, site ordinal)
  bool durable_touch_ = false;
};

}  // namespace ntx
