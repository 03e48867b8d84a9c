#include "ntx/engine.hpp"

#include <algorithm>
#include <sstream>

namespace ntx {

namespace {

std::map<SiteId, std::vector<ParticipantFile>> by_tss(
    const std::vector<ParticipantFile>& fs, bool writes_only = false) {
  std::map<SiteId, std::vector<ParticipantFile>> g;
  for (const auto& f : fs)
    if (!writes_only || f.mode == LockMode::WRITE) g[f.tss].push_back(f);
  return g;
}

}  // namespace

Engine::Engine(const Scenario& sc, Trace* trace) : Engine(sc, trace, Options{}) {}

Engine::Engine(const Scenario& sc, Trace* trace, Options opt)
    : sc_(sc), tr_(trace), opt_(opt) {
  net_ = std::make_unique<Network>(sc_.sites, tr_);
  net_->on_deliver([this](const Envelope& e) { deliver(e); });
  net_->on_timer([this](const Pid& p) { on_timer(p); });
  net_->on_topology_change([this](SiteId s) { on_topology_change(s); });

  for (SiteId s : sc_.sites) {
    sites_[s].locks = std::make_unique<LockTable>(s, tr_);
  }
  for (const auto& fd : sc_.files) {
    FileState init = FileState::from_pages(fd.pages);
    for (SiteId r : fd.replicas) durable_.add_replica(fd.name, r, init);
  }
  for (const auto& f : sc_.faults) {
    if (f.what == Fault::What::VOTE_NO)
      vote_no_.insert({f.file, f.site.ordinal});
    else
      fault_queue_.push_back(f);
  }
  for (const auto& pd : sc_.procs) {
    Process& pr = make_process(pd.site, pd.name, Tid{},
                               &sc_.scripts.at(pd.script), Pid{});
    procs_by_name_[pd.name] = pr.pid;
    schedule_proc(pr.pid, 1);
  }
}

const LockTable& Engine::locks(SiteId s) const { return *sites_.at(s).locks; }

const Process* Engine::process_by_name(const std::string& name) const {
  auto it = procs_by_name_.find(name);
  if (it == procs_by_name_.end()) return nullptr;
  auto p = procs_.find(it->second);
  return p == procs_.end() ? nullptr : &p->second;
}

const TransRecord* Engine::find_record(const Tid& t) const {
  if (t.empty()) return nullptr;
  auto s = sites_.find(t.home_site());
  if (s == sites_.end()) return nullptr;
  auto it = s->second.records.find(t);
  return it == s->second.records.end() ? nullptr : &it->second;
}

std::size_t Engine::record_count() const {
  std::size_t n = 0;
  for (const auto& [s, st] : sites_) n += st.records.size();
  return n;
}

long Engine::counter(const std::string& name) const {
  if (name == "remote-messages") return net_->totals().remote;
  if (name == "local-calls") return net_->totals().local;
  if (name == "dropped-messages") return net_->totals().dropped;
  if (name == "durable-page-writes") return durable_.total_page_writes();
  auto dash = name.find('-');
  if (dash != std::string::npos) {
    std::string what = name.substr(0, dash), phase = name.substr(dash + 1);
    auto it = net_->counters_by_phase().find(phase);
    if (it != net_->counters_by_phase().end()) {
      if (what == "remote") return it->second.remote;
      if (what == "local") return it->second.local;
      if (what == "dropped") return it->second.dropped;
    }
    return 0;
  }
  return 0;
}

// --- run loop ---------------------------------------------------------------

static bool fault_matches(const Fault& f, const Envelope& env) {
  return f.msg == to_string(env.msg.kind) && f.from == env.from && f.to == env.to;
}

bool Engine::fire_due_faults() {
  if (next_fault_ >= fault_queue_.size()) return false;
  const Fault& f = fault_queue_[next_fault_];
  if (f.when == Fault::When::AT_STEP && net_->now() >= f.step) {
    ++next_fault_;
    apply_partition(f);
    return true;
  }
  return false;
}

void Engine::apply_partition(const Fault& f) {
  net_->repartition(Topology::of_groups(f.groups));
}

void Engine::run() {
  long steps = 0;
  while (true) {
    if (fire_due_faults()) continue;
    auto nxt = net_->peek();
    if (!nxt) {
      if (next_fault_ < fault_queue_.size()) {
        const Fault& f = fault_queue_[next_fault_];
        ++next_fault_;
        if (f.when == Fault::When::ON_QUIESCENT || f.when == Fault::When::AT_STEP) {
          apply_partition(f);
        } else {
          trace(sc_.sites.front(), "status-change", "fault-never-matched msg=" + f.msg);
        }
        continue;
      }
      break;
    }
    if (next_fault_ < fault_queue_.size()) {
      const Fault& f = fault_queue_[next_fault_];
      if (f.when == Fault::When::BEFORE_DELIVER && !nxt->timer &&
          fault_matches(f, nxt->env)) {
        ++next_fault_;
        apply_partition(f);
        continue;  // the matched envelope may have been dropped just now
      }
    }
    bool was_delivery = !nxt->timer;
    Envelope cur = nxt->env;
    std::uint64_t pre = 0;
    if (opt_.check_invariants) pre = durable_.content_hash();
    durable_touch_ = false;
    net_->step();
    if (opt_.check_invariants && !durable_touch_ && durable_.content_hash() != pre) {
      std::ostringstream os;
      os << "durable content changed outside commit application at step " << net_->now();
      violations_.push_back(os.str());
    }
    if (next_fault_ < fault_queue_.size()) {
      const Fault& f = fault_queue_[next_fault_];
      if (f.when == Fault::When::AFTER_DELIVER && was_delivery && fault_matches(f, cur)) {
        ++next_fault_;
        apply_partition(f);
      }
    }
    if (++steps > sc_.step_limit) {
      std::ostringstream os;
      os << "no quiescence after " << sc_.step_limit << " steps; pending:\n";
      for (const auto& line : net_->pending_dump()) os << "  " << line << '\n';
      throw LivelockError(os.str());
    }
  }
}

// --- small helpers ----------------------------------------------------------

bool Engine::accessible(SiteId at, SiteId other) const {
  return net_->accessible(at, other);
}

void Engine::send(SiteId from, SiteId to, Message m) {
  net_->send(from, to, std::move(m));
}

void Engine::trace(SiteId s, const std::string& kind, const std::string& detail) {
  if (tr_) tr_->add(s, kind, detail);
}

TransRecord* Engine::record_at(SiteId home, const Tid& t) {
  auto& recs = sites_[home].records;
  auto it = recs.find(t);
  return it == recs.end() ? nullptr : &it->second;
}

void Engine::remove_record(SiteId home, const Tid& t) {
  sites_[home].records.erase(t);
  trace(home, "status-change", "record-removed tid=" + t.str());
}

void Engine::set_status(TransRecord& r, TxnStatus st, const std::string& why) {
  r.status = st;
  fates_[r.tid] = st;
  SiteId home = r.tid.home_site();
  if (st == TxnStatus::COMMITTED &&
      !chain_accessible(r.tid, net_->site_table(home))) {
    violations_.push_back("commit of " + r.tid.str() +
                          " while severed from a superior site");
  }
  trace(home, "status-change",
        "tid=" + r.tid.str() + " status=" + to_string(st) + " cause=" + why);
}

void Engine::guarded_sends(SiteId home, Tid tid,
                           const std::vector<std::pair<SiteId, Message>>& outs) {
  for (const auto& [to, m] : outs) {
    send(home, to, m);
    if (!record_at(home, tid)) return;
  }
}

static const FileDecl* find_file_decl(const Scenario& sc, const std::string& name) {
  for (const auto& f : sc.files)
    if (f.name == name) return &f;
  return nullptr;
}

// --- processes --------------------------------------------------------------

Pid Engine::new_pid(SiteId s) { return Pid{s, ++sites_[s].pid_serial}; }

Process& Engine::make_process(SiteId s, const std::string& name, const Tid& txn,
                              const Script* script, const Pid& parent) {
  Process pr;
  pr.pid = new_pid(s);
  pr.site = s;
  pr.name = name;
  pr.txn = txn;
  pr.script = script;
  pr.parent_proc = parent;
  auto [it, inserted] = procs_.emplace(pr.pid, std::move(pr));
  return it->second;
}

Process* Engine::find_proc(const Pid& p) {
  auto it = procs_.find(p);
  return it == procs_.end() ? nullptr : &it->second;
}

void Engine::schedule_proc(const Pid& p, long delay) { net_->schedule(p, delay); }

void Engine::on_timer(const Pid& p) { proc_step(p); }

void Engine::resume(Process& pr) {
  pr.wait = Process::Wait::NONE;
  pr.wait_sub = Tid{};
  ++pr.ip;
  schedule_proc(pr.pid, 1);
}

void Engine::proc_step(const Pid& p) {
  Process* pr = find_proc(p);
  if (!pr || pr->halted) return;
  if (pr->wait == Process::Wait::RETRY) {
    pr->wait = Process::Wait::NONE;
    attempt_open(*pr);
    return;
  }
  if (pr->wait != Process::Wait::NONE) return;  // a reply will resume us
  if (pr->ip >= pr->script->ops.size()) {
    do_exit(*pr, true);  // running off the end counts as a clean exit
    return;
  }
  const ScriptOp& op = pr->script->ops[pr->ip];
  switch (op.kind) {
    case ScriptOp::Kind::RELCALL: op_relcall(*pr, op); break;
    case ScriptOp::Kind::FORK: op_fork(*pr, op); break;
    case ScriptOp::Kind::WAIT: op_wait(*pr); break;
    case ScriptOp::Kind::OPEN: op_open(*pr, op); break;
    case ScriptOp::Kind::READ:
    case ScriptOp::Kind::WRITE: op_data(*pr, op); break;
    case ScriptOp::Kind::CLOSE: op_close(*pr, op); break;
    case ScriptOp::Kind::SLEEP:
      ++pr->ip;
      schedule_proc(p, std::max<long>(1, op.steps));
      break;
    case ScriptOp::Kind::EXIT: {
      bool ok = op.how == ScriptOp::ExitHow::SUCCESS ||
                (op.how == ScriptOp::ExitHow::IF_ALL && pr->ok_so_far);
      do_exit(*pr, ok);
      break;
    }
  }
}

void Engine::hard_fail(Process& pr, const std::string& why) {
  trace(pr.site, "status-change", "script-failure pid=" + pr.pid.str() + " cause=" + why);
  do_exit(pr, false);
}

void Engine::do_exit(Process& pr, bool ok) {
  if (pr.halted) return;
  pr.halted = true;
  pr.wait = Process::Wait::NONE;
  std::ostringstream os;
  os << "exit pid=" << pr.pid.str() << " ok=" << (ok ? "yes" : "no");
  trace(pr.site, "status-change", os.str());
  if (pr.parent_proc.valid() && accessible(pr.site, pr.parent_proc.site)) {
    Message m;
    m.kind = MsgKind::RETCODE;
    m.pid = pr.parent_proc;
    m.pid2 = pr.pid;
    m.ok = ok;
    send(pr.site, pr.parent_proc.site, m);
  }
  if (!pr.txn.empty()) {
    SiteId home = pr.txn.home_site();
    if (accessible(pr.site, home)) {
      Message m;
      m.kind = MsgKind::HOMEUPD;
      m.upd = HomeUpdKind::MEMBER_EXIT;
      m.tid = pr.txn;
      m.pid = pr.pid;
      m.ok = ok;
      send(pr.site, home, m);
    }
  }
}

void Engine::destroy_process(const Pid& p, const std::string& why) {
  Process* pr = find_proc(p);
  if (!pr || pr->halted) return;
  pr->halted = true;
  pr->wait = Process::Wait::NONE;
  trace(pr->site, "status-change", "destroyed pid=" + p.str() + " cause=" + why);
}

void Engine::op_relcall(Process& pr, const ScriptOp& op) {
  SiteId target = op.site;
  if (!accessible(pr.site, target)) {
    trace(pr.site, "denial", "relcall target=" + target.str() + " reason=inaccessible");
    pr.codes.push_back(CompletionCode::ABORTED);
    pr.ok_so_far = false;
    ++pr.ip;
    schedule_proc(pr.pid, 1);
    return;
  }
  Tid t = pr.txn.empty() ? Tid::top_level(target, ++sites_[target].tid_serial)
                         : pr.txn.child(target, ++sites_[target].tid_serial);
  pr.pending_relcall = Process::PendingRelcall{t, op.program, target};
  if (pr.txn.empty()) {
    send_relcall(pr);
    return;
  }
  // the member entry at the home site must record the pending subtransaction
  // before the invocation goes out
  Message m;
  m.kind = MsgKind::HOMEUPD;
  m.upd = HomeUpdKind::SET_SUBTRANS;
  m.tid = pr.txn;
  m.subject = t;
  m.pid = pr.pid;
  pr.wait = Process::Wait::HOMEUPDR;
  pr.wait_site = pr.txn.home_site();
  send(pr.site, pr.txn.home_site(), m);
}

void Engine::send_relcall(Process& pr) {
  const auto& pend = *pr.pending_relcall;
  Message m;
  m.kind = MsgKind::RELCALL;
  m.tid = pend.tid;
  m.program = pend.program;
  m.pid = pr.pid;
  pr.wait = Process::Wait::RELCALL;
  pr.wait_site = pend.site;
  pr.wait_sub = pend.tid;
  SiteId to = pend.site;
  pr.pending_relcall.reset();
  send(pr.site, to, m);
}

void Engine::op_fork(Process& pr, const ScriptOp& op) {
  SiteId target = op.site;
  if (!accessible(pr.site, target)) {
    hard_fail(pr, "fork-target-inaccessible");
    return;
  }
  auto sit = sc_.scripts.find(op.program);
  Process& child = make_process(target, "", pr.txn, &sit->second, pr.pid);
  child.name = child.pid.str();
  pr.children.push_back(child.pid);
  if (pr.txn.empty()) {
    schedule_proc(child.pid, 1);
  } else {
    // the new process may not run until the home site lists it as a member
    Message m;
    m.kind = MsgKind::FORKREQ;
    m.tid = pr.txn;
    m.pid = child.pid;
    m.pid2 = pr.pid;
    send(target, pr.txn.home_site(), m);
  }
  ++pr.ip;
  schedule_proc(pr.pid, 1);
}

void Engine::op_wait(Process& pr) {
  if (pr.children.empty()) {
    hard_fail(pr, "wait-without-children");
    return;
  }
  Pid c = pr.children.front();
  auto it = pr.child_codes.find(c);
  if (it != pr.child_codes.end()) {
    pr.children.pop_front();
    if (!it->second) pr.ok_so_far = false;
    pr.child_codes.erase(it);
    ++pr.ip;
    schedule_proc(pr.pid, 1);
    return;
  }
  pr.wait = Process::Wait::CHILD;
  pr.wait_child = c;
}

void Engine::op_open(Process& pr, const ScriptOp& op) {
  if (pr.txn.empty()) {
    hard_fail(pr, "file-access-outside-transaction");
    return;
  }
  pr.retries_left = sc_.retry_limit;
  attempt_open(pr);
}

void Engine::attempt_open(Process& pr) {
  const ScriptOp& op = pr.script->ops[pr.ip];
  const FileDecl* fd = find_file_decl(sc_, op.file);
  std::vector<SiteId> cands;
  for (SiteId r : fd->replicas)
    if (accessible(pr.site, r)) cands.push_back(r);
  if (cands.empty()) {
    hard_fail(pr, "open-no-accessible-copy file=" + op.file);
    return;
  }
  SiteId tss = *std::min_element(cands.begin(), cands.end());
  pr.pending_open = Process::PendingOpen{op.file, op.mode, tss};
  bool write = op.mode == LockMode::WRITE;
  bool have = pr.registered.count({op.file, tss.ordinal, write}) ||
              (!write && pr.registered.count({op.file, tss.ordinal, true}));
  if (!have) {
    Message m;
    m.kind = MsgKind::HOMEUPD;
    m.upd = HomeUpdKind::ADD_FILE;
    m.tid = pr.txn;
    m.pid = pr.pid;
    m.files = {ParticipantFile{op.file, tss, op.mode}};
    pr.wait = Process::Wait::HOMEUPDR;
    pr.wait_site = pr.txn.home_site();
    send(pr.site, pr.txn.home_site(), m);
    return;
  }
  const auto& pend = *pr.pending_open;
  Message m;
  m.kind = MsgKind::OPEN;
  m.tid = pr.txn;
  m.file = pend.file;
  m.mode = pend.mode;
  m.pid = pr.pid;
  pr.wait = Process::Wait::OPENR;
  pr.wait_site = pend.tss;
  send(pr.site, pend.tss, m);
}

void Engine::op_data(Process& pr, const ScriptOp& op) {
  auto it = pr.open_tss.find(op.file);
  if (it == pr.open_tss.end()) {
    hard_fail(pr, "file-not-open file=" + op.file);
    return;
  }
  Message m;
  m.tid = pr.txn;
  m.file = op.file;
  m.page = op.page;
  m.pid = pr.pid;
  if (op.kind == ScriptOp::Kind::READ) {
    m.kind = MsgKind::READ;
    pr.wait = Process::Wait::READR;
  } else {
    m.kind = MsgKind::WRITE;
    m.data = op.data;
    pr.wait = Process::Wait::WRITER;
  }
  pr.wait_site = it->second;
  send(pr.site, it->second, m);
}

void Engine::op_close(Process& pr, const ScriptOp& op) {
  auto it = pr.open_tss.find(op.file);
  if (it == pr.open_tss.end()) {
    hard_fail(pr, "file-not-open file=" + op.file);
    return;
  }
  Message m;
  m.kind = MsgKind::CLOSE;
  m.tid = pr.txn;
  m.file = op.file;
  m.pid = pr.pid;
  pr.wait = Process::Wait::CLOSER;
  pr.wait_site = it->second;
  send(pr.site, it->second, m);
}

void Engine::request_abort(SiteId from, const Tid& t) {
  SiteId home = t.home_site();
  if (!accessible(from, home)) return;
  Message m;
  m.kind = MsgKind::HOMEUPD;
  m.upd = HomeUpdKind::ABORT_REQUEST;
  m.tid = t;
  send(from, home, m);
}

void Engine::deliver_completion(const Pid& p, const Tid& sub, CompletionCode code) {
  Process* pr = find_proc(p);
  if (!pr || pr->halted || pr->wait != Process::Wait::RELCALL || pr->wait_sub != sub) {
    if (tr_) trace(p.site, "status-change", "completion-dropped pid=" + p.str() +
                                                " sub=" + sub.str());
    return;
  }
  pr->codes.push_back(code);
  if (code != CompletionCode::COMMITTED) pr->ok_so_far = false;
  trace(p.site, "status-change",
        "completion pid=" + p.str() + " sub=" + sub.str() + " code=" + to_string(code));
  resume(*pr);
}

void Engine::deliver_child_code(const Pid& parent, const Pid& child, bool ok) {
  Process* pr = find_proc(parent);
  if (!pr || pr->halted) return;
  pr->child_codes[child] = ok;
  if (pr->wait == Process::Wait::CHILD && pr->wait_child == child) {
    pr->children.pop_front();
    pr->child_codes.erase(child);
    if (!ok) pr->ok_so_far = false;
    pr->wait = Process::Wait::NONE;
    ++pr->ip;
    schedule_proc(parent, 1);
  }
}

// --- message dispatch -------------------------------------------------------

void Engine::deliver(const Envelope& e) {
  switch (e.msg.kind) {
    case MsgKind::RELCALL: h_relcall(e); break;
    case MsgKind::OPEN: h_open(e); break;
    case MsgKind::OPENR: h_openr(e); break;
    case MsgKind::READ: h_read(e); break;
    case MsgKind::READR: h_readr(e); break;
    case MsgKind::WRITE: h_write(e); break;
    case MsgKind::WRITER: h_writer(e); break;
    case MsgKind::CLOSE: h_close(e); break;
    case MsgKind::CLOSER: h_closer(e); break;
    case MsgKind::FORKREQ: h_forkreq(e); break;
    case MsgKind::FORKR: h_forkr(e); break;
    case MsgKind::HOMEUPD: h_homeupd(e); break;
    case MsgKind::HOMEUPDR: h_homeupdr(e); break;
    case MsgKind::RETCODE: h_retcode(e); break;
    case MsgKind::DESTROY: h_destroy(e); break;
    case MsgKind::REQCOMMIT: h_reqcommit(e); break;
    case MsgKind::GRTCOMMIT: h_grtcommit(e); break;
    case MsgKind::TSSCOMMIT: h_tsscommit(e); break;
    case MsgKind::RTSSCOMMIT: h_rtsscommit(e); break;
    case MsgKind::SUBCOMMIT: h_subcommit(e); break;
    case MsgKind::SUBCMTFAIL: h_subcmtfail(e); break;
    case MsgKind::FORCEABT: h_forceabt(e); break;
    case MsgKind::RFORCEABT: h_rforceabt(e); break;
    case MsgKind::TSSABORT: h_tssabort(e); break;
    case MsgKind::RTSSABORT: h_rtssabort(e); break;
    case MsgKind::SUBABORT: h_subabort(e); break;
    case MsgKind::TOPABORT: h_topabort(e); break;
    case MsgKind::TOPCOMMIT: h_topcommit(e); break;
    case MsgKind::PREPARE: h_prepare(e); break;
    case MsgKind::VOTE: h_vote(e); break;
    case MsgKind::COMMIT: h_commit(e); break;
    case MsgKind::ACK: h_ack(e); break;
  }
}

void Engine::h_relcall(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  auto& st = sites_[s];
  Process& tp = make_process(s, m.tid.str(), m.tid, &sc_.scripts.at(m.program), Pid{});
  tp.top = true;
  TransRecord r;
  r.tid = m.tid;
  r.caller = m.pid;
  r.top_proc = tp.pid;
  r.add_member(tp.pid);
  st.records[m.tid] = std::move(r);
  fates_[m.tid] = TxnStatus::UNDEFINED;
  trace(s, "status-change",
        "created tid=" + m.tid.str() + " program=" + m.program + " top=" + tp.pid.str());
  schedule_proc(tp.pid, 1);
}

void Engine::h_open(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  Message rep;
  rep.kind = MsgKind::OPENR;
  rep.tid = m.tid;
  rep.file = m.file;
  rep.pid = m.pid;
  if (!durable_.has_replica(m.file, s)) {
    rep.ok = false;
    rep.note = "no-copy";
    trace(s, "denial", "open file=" + m.file + " tid=" + m.tid.str() + " reason=no-copy");
  } else if (durable_.in_doubt(m.file, s)) {
    rep.ok = false;
    rep.note = "in-doubt";
    trace(s, "denial", "open file=" + m.file + " tid=" + m.tid.str() + " reason=in-doubt");
  } else {
    OpenOutcome o = sites_[s].locks->tss_open(m.file, durable_.state(m.file, s),
                                              m.tid, m.mode, m.pid.site,
                                              net_->site_table(s));
    rep.ok = o.granted;
    rep.note = o.reason;
  }
  send(s, m.pid.site, rep);
}

void Engine::h_openr(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted || pr->wait != Process::Wait::OPENR) return;
  if (m.ok) {
    pr->open_tss[m.file] = e.from;
    pr->pending_open.reset();
    resume(*pr);
    return;
  }
  if (pr->retries_left > 0) {
    --pr->retries_left;
    pr->wait = Process::Wait::RETRY;
    trace(pr->site, "status-change",
          "open-retry pid=" + pr->pid.str() + " file=" + m.file + " reason=" + m.note);
    schedule_proc(pr->pid, 2);
    return;
  }
  pr->pending_open.reset();
  hard_fail(*pr, "open-denied file=" + m.file + " reason=" + m.note);
}

void Engine::h_read(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  ReadOutcome ro = sites_[s].locks->read_page(m.file, m.tid, static_cast<std::size_t>(m.page));
  Message rep;
  rep.kind = MsgKind::READR;
  rep.tid = m.tid;
  rep.file = m.file;
  rep.pid = m.pid;
  rep.ok = ro.status == AccessStatus::OK;
  if (ro.status == AccessStatus::OK) {
    rep.data = ro.content;
  } else if (ro.status == AccessStatus::BAD_PAGE) {
    rep.note = "no-such-page";
  } else {
    rep.note = "denied";
    trace(s, "denial", "read file=" + m.file + " tid=" + m.tid.str() + " reason=no-hold");
  }
  send(s, m.pid.site, rep);
}

void Engine::h_readr(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted || pr->wait != Process::Wait::READR) return;
  if (m.ok) {
    resume(*pr);
    return;
  }
  if (m.note == "no-such-page") {
    hard_fail(*pr, "read-past-end file=" + m.file);
    return;
  }
  // a refused access means our hold is gone: the transaction is stale
  trace(pr->site, "status-change", "stale-access pid=" + pr->pid.str() + " file=" + m.file);
  request_abort(pr->site, pr->txn);
  pr->halted = true;
}

void Engine::h_write(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  AccessStatus st = sites_[s].locks->write_page(m.file, m.tid,
                                                static_cast<std::size_t>(m.page), m.data);
  Message rep;
  rep.kind = MsgKind::WRITER;
  rep.tid = m.tid;
  rep.file = m.file;
  rep.pid = m.pid;
  rep.ok = st == AccessStatus::OK;
  if (st == AccessStatus::OK) {
    writes_.push_back(AppliedWrite{net_->now(), m.tid, m.file, m.page, m.data});
  } else if (st == AccessStatus::BAD_PAGE) {
    rep.note = "no-such-page";
  } else {
    rep.note = "denied";
    trace(s, "denial", "write file=" + m.file + " tid=" + m.tid.str() + " reason=no-hold");
  }
  send(s, m.pid.site, rep);
}

void Engine::h_writer(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted || pr->wait != Process::Wait::WRITER) return;
  if (m.ok) {
    resume(*pr);
    return;
  }
  if (m.note == "no-such-page") {
    hard_fail(*pr, "write-past-end file=" + m.file);
    return;
  }
  trace(pr->site, "status-change", "stale-access pid=" + pr->pid.str() + " file=" + m.file);
  request_abort(pr->site, pr->txn);
  pr->halted = true;
}

void Engine::h_close(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  sites_[s].locks->tss_close(m.file, m.tid);
  Message rep;
  rep.kind = MsgKind::CLOSER;
  rep.tid = m.tid;
  rep.file = m.file;
  rep.pid = m.pid;
  rep.ok = true;
  send(s, m.pid.site, rep);
}

void Engine::h_closer(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted || pr->wait != Process::Wait::CLOSER) return;
  pr->open_tss.erase(m.file);
  resume(*pr);
}

void Engine::h_forkreq(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(s, m.tid);
  Message rep;
  rep.kind = MsgKind::FORKR;
  rep.tid = m.tid;
  rep.pid = m.pid;
  if (!r || r->phase != TxnPhase::RUNNING) {
    rep.ok = false;
  } else {
    r->add_member(m.pid);
    rep.ok = true;
  }
  send(s, m.pid.site, rep);
}

void Engine::h_forkr(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted) return;
  if (m.ok) {
    schedule_proc(pr->pid, 1);
  } else {
    destroy_process(pr->pid, "fork-refused");
  }
}

void Engine::h_homeupd(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(s, m.tid);
  switch (m.upd) {
    case HomeUpdKind::ADD_FILE: {
      Message rep;
      rep.kind = MsgKind::HOMEUPDR;
      rep.upd = m.upd;
      rep.tid = m.tid;
      rep.pid = m.pid;
      if (!r || r->phase != TxnPhase::RUNNING) {
        rep.ok = false;
        rep.note = "no-record";
      } else {
        r->add_file(m.files.front());
        rep.ok = true;
      }
      send(s, m.pid.site, rep);
      break;
    }
    case HomeUpdKind::SET_SUBTRANS: {
      Message rep;
      rep.kind = MsgKind::HOMEUPDR;
      rep.upd = m.upd;
      rep.tid = m.tid;
      rep.subject = m.subject;
      rep.pid = m.pid;
      Member* mem = r ? r->find_member(m.pid) : nullptr;
      if (!r || r->phase != TxnPhase::RUNNING || !mem) {
        rep.ok = false;
        rep.note = "no-record";
      } else if (!can_invoke(*mem)) {
        rep.ok = false;
        rep.note = "busy";
      } else {
        mem->subtrans = m.subject;
        rep.ok = true;
      }
      send(s, m.pid.site, rep);
      break;
    }
    case HomeUpdKind::MEMBER_EXIT:
      exit_member(s, m.tid, m.pid, m.ok);
      break;
    case HomeUpdKind::ABORT_REQUEST:
      if (r && !r->aborting()) abort_transaction(*r, "requested");
      break;
    case HomeUpdKind::CLEAR_SUBTRANS:
      if (r) {
        for (auto& mem : r->members)
          if (mem.subtrans == m.subject) {
            mem.subtrans = Tid{};
            mem.sub_committing = false;
          }
      }
      break;
  }
}

void Engine::h_homeupdr(const Envelope& e) {
  const Message& m = e.msg;
  Process* pr = find_proc(m.pid);
  if (!pr || pr->halted || pr->wait != Process::Wait::HOMEUPDR) return;
  if (m.upd == HomeUpdKind::SET_SUBTRANS) {
    if (m.ok) {
      send_relcall(*pr);
      return;
    }
    pr->pending_relcall.reset();
    if (m.note == "busy") {
      trace(pr->site, "denial", "relcall pid=" + pr->pid.str() + " reason=busy");
      pr->codes.push_back(CompletionCode::ABORTED);
      pr->ok_so_far = false;
      resume(*pr);
      return;
    }
    // record gone: the transaction is being torn down around us
    pr->halted = true;
    return;
  }
  if (m.upd == HomeUpdKind::ADD_FILE) {
    if (!m.ok) {
      pr->halted = true;
      return;
    }
    const auto& pend = *pr->pending_open;
    pr->registered.insert({pend.file, pend.tss.ordinal, pend.mode == LockMode::WRITE});
    Message open;
    open.kind = MsgKind::OPEN;
    open.tid = pr->txn;
    open.file = pend.file;
    open.mode = pend.mode;
    open.pid = pr->pid;
    pr->wait = Process::Wait::OPENR;
    pr->wait_site = pend.tss;
    send(pr->site, pend.tss, open);
  }
}

void Engine::h_retcode(const Envelope& e) {
  const Message& m = e.msg;
  if (!m.subject.empty())
    deliver_completion(m.pid, m.subject, m.code);
  else
    deliver_child_code(m.pid, m.pid2, m.ok);
}

void Engine::h_destroy(const Envelope& e) {
  destroy_process(e.msg.pid, "destroyed-by-home");
}

// --- home-site record handling ----------------------------------------------

void Engine::exit_member(SiteId home, const Tid& t, const Pid& p, bool ok) {
  TransRecord* r = record_at(home, t);
  if (!r) return;
  if (r->phase != TxnPhase::RUNNING) {
    r->remove_member(p);
    return;
  }
  Member* m = r->find_member(p);
  if (!m) return;
  if (!ok) {
    abort_transaction(*r, "member-failure");
    return;
  }
  bool pending_sub = !m->subtrans.empty() || m->sub_committing;
  if (p == r->top_proc) {
    if (r->members.size() > 1 || pending_sub) {
      trace(home, "status-change", "commit-coerced-to-abort tid=" + t.str());
      abort_transaction(*r, "top-exit-while-members-remain");
      return;
    }
    r->remove_member(p);
    if (r->tid.top_level())
      toplevel_commit(*r);
    else
      subtransaction_commit(*r);
    return;
  }
  if (pending_sub) {
    abort_transaction(*r, "member-exit-with-subtransaction");
    return;
  }
  r->remove_member(p);
}

// --- subtransaction commit --------------------------------------------------

void Engine::subtransaction_commit(TransRecord& r) {
  SiteId hc = r.tid.home_site();
  for (const auto& f : r.files) {
    if (!accessible(hc, f.tss)) {
      abort_transaction(r, "commit-storage-severed");
      return;
    }
  }
  SiteId hp = r.tid.parent()->home_site();
  if (!accessible(hc, hp)) {
    abort_transaction(r, "commit-parent-severed");
    return;
  }
  r.phase = TxnPhase::SUB_WAIT_GRT;
  r.await_sites = {hp};
  Message m;
  m.kind = MsgKind::REQCOMMIT;
  m.tid = r.tid;
  m.files = r.files;
  send(hc, hp, m);
}

void Engine::h_reqcommit(const Envelope& e) {
  SiteId hp = e.to;
  const Message& m = e.msg;
  Tid parent = *m.tid.parent();
  TransRecord* r = record_at(hp, parent);
  if (!r || r->phase != TxnPhase::RUNNING) {
    trace(hp, "status-change", "commit-request-ignored tid=" + m.tid.str());
    return;
  }
  for (const auto& f : m.files) r->add_file(f);
  for (auto& mem : r->members)
    if (mem.subtrans == m.tid) mem.sub_committing = true;
  Message g;
  g.kind = MsgKind::GRTCOMMIT;
  g.tid = m.tid;
  send(hp, e.from, g);
}

void Engine::h_grtcommit(const Envelope& e) {
  SiteId hc = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(hc, m.tid);
  if (!r || r->phase != TxnPhase::SUB_WAIT_GRT) return;
  auto groups = by_tss(r->files);
  for (const auto& [tss, fl] : groups) {
    if (!accessible(hc, tss)) {
      finish_subcommit(*r, false);
      return;
    }
  }
  r->phase = TxnPhase::SUB_WAIT_TSS;
  r->await_sites.clear();
  r->commit_failed = false;
  if (groups.empty()) {
    finish_subcommit(*r, true);
    return;
  }
  std::vector<std::pair<SiteId, Message>> outs;
  for (const auto& [tss, fl] : groups) {
    r->await_sites.insert(tss);
    Message t;
    t.kind = MsgKind::TSSCOMMIT;
    t.tid = r->tid;
    t.files = fl;
    outs.push_back({tss, t});
  }
  guarded_sends(hc, m.tid, outs);
}

void Engine::h_tsscommit(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  for (const auto& f : m.files) sites_[s].locks->tss_commit(f.file, m.tid);
  Message rep;
  rep.kind = MsgKind::RTSSCOMMIT;
  rep.tid = m.tid;
  rep.ok = true;
  send(s, e.from, rep);
}

void Engine::h_rtsscommit(const Envelope& e) {
  SiteId hc = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(hc, m.tid);
  if (!r) return;
  if (r->phase != TxnPhase::SUB_WAIT_TSS && r->phase != TxnPhase::TOP_WAIT_TSS) return;
  r->await_sites.erase(e.from);
  if (!m.ok) r->commit_failed = true;
  if (!r->await_sites.empty()) return;
  if (r->phase == TxnPhase::SUB_WAIT_TSS) {
    finish_subcommit(*r, !r->commit_failed);
  } else {
    if (r->commit_failed)
      top_abort_decision(*r, "lock-inheritance-failed");
    else
      start_prepare(*r);
  }
}

void Engine::finish_subcommit(TransRecord& r, bool ok) {
  SiteId hc = r.tid.home_site();
  SiteId hp = r.tid.parent()->home_site();
  Tid tid = r.tid;
  Pid caller = r.caller;
  set_status(r, ok ? TxnStatus::COMMITTED : TxnStatus::ABORTED,
             ok ? "subtransaction-commit" : "subtransaction-commit-failed");
  remove_record(hc, tid);
  Message m;
  m.kind = ok ? MsgKind::SUBCOMMIT : MsgKind::SUBCMTFAIL;
  m.tid = tid;
  m.pid = caller;
  m.code = ok ? CompletionCode::COMMITTED : CompletionCode::ABORTED;
  if (accessible(hc, hp)) send(hc, hp, m);
}

void Engine::h_subcommit(const Envelope& e) {
  SiteId hp = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(hp, *m.tid.parent());
  if (r) {
    for (auto& mem : r->members)
      if (mem.subtrans == m.tid) {
        mem.subtrans = Tid{};
        mem.sub_committing = false;
      }
  }
  if (accessible(hp, m.pid.site)) {
    Message rc;
    rc.kind = MsgKind::RETCODE;
    rc.pid = m.pid;
    rc.subject = m.tid;
    rc.code = m.code;
    send(hp, m.pid.site, rc);
  }
}

void Engine::h_subcmtfail(const Envelope& e) {
  SiteId hp = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(hp, *m.tid.parent());
  if (!r) return;
  for (auto& mem : r->members)
    if (mem.subtrans == m.tid) {
      mem.subtrans = Tid{};
      mem.sub_committing = false;
    }
  // the inheritance may have partly taken effect; the only safe reaction is
  // to abort ourselves, which unwinds whatever did get relabeled
  if (!r->aborting()) abort_transaction(*r, "child-commit-failed");
}

// --- top-level commit -------------------------------------------------------

void Engine::toplevel_commit(TransRecord& r) {
  SiteId h = r.tid.home_site();
  for (const auto& f : r.files) {
    if (!accessible(h, f.tss)) {
      abort_transaction(r, "commit-storage-severed");
      return;
    }
  }
  auto groups = by_tss(r.files);
  if (groups.empty()) {
    Tid tid = r.tid;
    Pid caller = r.caller;
    set_status(r, TxnStatus::COMMITTED, "top-commit-no-files");
    remove_record(h, tid);
    Message m;
    m.kind = MsgKind::TOPCOMMIT;
    m.tid = tid;
    m.pid = caller;
    m.code = CompletionCode::COMMITTED;
    if (accessible(h, caller.site)) send(h, caller.site, m);
    return;
  }
  r.phase = TxnPhase::TOP_WAIT_TSS;
  r.await_sites.clear();
  r.commit_failed = false;
  std::vector<std::pair<SiteId, Message>> outs;
  for (const auto& [tss, fl] : groups) {
    r.await_sites.insert(tss);
    Message t;
    t.kind = MsgKind::TSSCOMMIT;
    t.tid = r.tid;
    t.files = fl;
    outs.push_back({tss, t});
  }
  guarded_sends(h, r.tid, outs);
}

void Engine::start_prepare(TransRecord& r) {
  SiteId h = r.tid.home_site();
  auto writes = by_tss(r.files, true);
  if (writes.empty()) {
    // nothing durable to change anywhere: the second phase is skipped
    Tid tid = r.tid;
    Pid caller = r.caller;
    set_status(r, TxnStatus::COMMITTED, "top-commit-read-only");
    remove_record(h, tid);
    Message m;
    m.kind = MsgKind::TOPCOMMIT;
    m.tid = tid;
    m.pid = caller;
    m.code = CompletionCode::COMMITTED;
    if (accessible(h, caller.site)) send(h, caller.site, m);
    return;
  }
  for (const auto& [tss, fl] : writes) {
    if (!accessible(h, tss)) {
      top_abort_decision(r, "prepare-storage-severed");
      return;
    }
  }
  r.phase = TxnPhase::TOP_WAIT_VOTES;
  r.await_sites.clear();
  r.commit_failed = false;
  std::vector<std::pair<SiteId, Message>> outs;
  for (const auto& [tss, fl] : writes) {
    r.await_sites.insert(tss);
    Message p;
    p.kind = MsgKind::PREPARE;
    p.tid = r.tid;
    p.files = fl;
    outs.push_back({tss, p});
  }
  guarded_sends(h, r.tid, outs);
}

void Engine::h_prepare(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  bool ok = true;
  for (const auto& f : m.files) {
    auto vn = vote_no_.find({f.file, s.ordinal});
    if (vn != vote_no_.end()) {
      vote_no_.erase(vn);
      trace(s, "denial", "prepare file=" + f.file + " tid=" + m.tid.str() + " reason=refused");
      ok = false;
      break;
    }
    const TLock* l = sites_[s].locks->find(f.file);
    if (!l || !l->commit_pending || *l->commit_pending != m.tid) {
      trace(s, "denial", "prepare file=" + f.file + " tid=" + m.tid.str() + " reason=no-pending-state");
      ok = false;
      break;
    }
  }
  if (ok) {
    for (const auto& f : m.files) {
      const TLock* l = sites_[s].locks->find(f.file);
      durable_.log_prepared(s, m.tid, f.file, l->current);
      trace(s, "durable-write", "log-prepared tid=" + m.tid.str() + " file=" + f.file);
    }
  }
  Message v;
  v.kind = MsgKind::VOTE;
  v.tid = m.tid;
  v.ok = ok;
  send(s, e.from, v);
}

void Engine::h_vote(const Envelope& e) {
  SiteId h = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(h, m.tid);
  if (!r || r->phase != TxnPhase::TOP_WAIT_VOTES) return;
  r->await_sites.erase(e.from);
  if (!m.ok) r->commit_failed = true;
  if (!r->await_sites.empty()) return;
  if (r->commit_failed)
    top_abort_decision(*r, "participant-refused");
  else
    top_commit_point(*r);
}

void Engine::top_commit_point(TransRecord& r) {
  SiteId h = r.tid.home_site();
  durable_.log_commit_point(h, r.tid);
  trace(h, "durable-write", "log-commit-point tid=" + r.tid.str());
  set_status(r, TxnStatus::COMMITTED, "commit-point");
  if (accessible(h, r.caller.site)) {
    Message m;
    m.kind = MsgKind::TOPCOMMIT;
    m.tid = r.tid;
    m.pid = r.caller;
    m.code = CompletionCode::COMMITTED;
    send(h, r.caller.site, m);
  }
  r.caller_notified = true;
  auto writes = by_tss(r.files, true);
  r.phase = TxnPhase::TOP_WAIT_ACKS;
  r.await_sites.clear();
  std::vector<std::pair<SiteId, Message>> outs;
  for (const auto& [tss, fl] : writes) {
    if (!accessible(h, tss)) continue;  // resolved from the log after a merge
    r.await_sites.insert(tss);
    Message c;
    c.kind = MsgKind::COMMIT;
    c.tid = r.tid;
    c.files = fl;
    outs.push_back({tss, c});
  }
  if (outs.empty()) {
    remove_record(h, r.tid);
    return;
  }
  guarded_sends(h, r.tid, outs);
}

void Engine::apply_commit_at(SiteId s, const Tid& t, const std::string& file,
                             const FileState& state, const char* how) {
  durable_touch_ = true;
  const FileDecl* fd = find_file_decl(sc_, file);
  std::vector<SiteId> applied;
  for (SiteId rs : fd->replicas) {
    if (!accessible(s, rs)) continue;
    int n = durable_.apply_committed(file, rs, state);
    std::ostringstream os;
    os << "apply tid=" << t.str() << " file=" << file << " pages=" << n
       << " via=" << how;
    trace(rs, "durable-write", os.str());
    applied.push_back(rs);
  }
  durable_.log_resolved(s, t, file, true);
  trace(s, "durable-write", "log-resolved tid=" + t.str() + " file=" + file + " outcome=commit");
  TLock* l = sites_[s].locks->find(file);
  if (l && l->commit_pending && *l->commit_pending == t) sites_[s].locks->discard(file);
  applies_.push_back(CommitApply{net_->now(), t, file, applied});
}

void Engine::h_commit(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  for (const auto& f : m.files) {
    bool found = false;
    for (const auto& p : durable_.unresolved_prepared(s)) {
      if (p.tid == m.tid && p.file == f.file) {
        apply_commit_at(s, m.tid, f.file, p.state, "decision");
        found = true;
        break;
      }
    }
    if (!found)
      trace(s, "status-change", "commit-already-resolved tid=" + m.tid.str() + " file=" + f.file);
  }
  Message a;
  a.kind = MsgKind::ACK;
  a.tid = m.tid;
  send(s, e.from, a);
}

void Engine::h_ack(const Envelope& e) {
  SiteId h = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(h, m.tid);
  if (!r || r->phase != TxnPhase::TOP_WAIT_ACKS) return;
  r->await_sites.erase(e.from);
  if (r->await_sites.empty()) remove_record(h, m.tid);
}

void Engine::top_abort_decision(TransRecord& r, const std::string& why) {
  SiteId h = r.tid.home_site();
  set_status(r, TxnStatus::ABORTED, why);
  if (!r.caller_notified && accessible(h, r.caller.site)) {
    Message m;
    m.kind = MsgKind::TOPABORT;
    m.tid = r.tid;
    m.pid = r.caller;
    m.code = CompletionCode::ABORTED;
    send(h, r.caller.site, m);
  }
  r.caller_notified = true;
  abort_enter_tss_phase(r);
}

void Engine::h_topcommit(const Envelope& e) {
  deliver_completion(e.msg.pid, e.msg.tid, e.msg.code);
}

void Engine::h_topabort(const Envelope& e) {
  deliver_completion(e.msg.pid, e.msg.tid, e.msg.code);
}

// --- abort ------------------------------------------------------------------

void Engine::abort_transaction(TransRecord& r, const std::string& why) {
  if (r.aborting()) return;
  SiteId h = r.tid.home_site();
  set_status(r, TxnStatus::ABORTED, why);
  std::vector<Pid> members;
  std::vector<Tid> kids;
  for (const auto& m : r.members) {
    members.push_back(m.pid);
    if (!m.subtrans.empty()) kids.push_back(m.subtrans);
  }
  r.members.clear();
  r.phase = TxnPhase::ABORT_WAIT_CHILDREN;
  r.await_children.clear();
  for (const Tid& k : kids)
    if (accessible(h, k.home_site())) r.await_children.insert(k);
  Tid tid = r.tid;
  for (const Pid& p : members) {
    if (!accessible(h, p.site)) continue;
    Message m;
    m.kind = MsgKind::DESTROY;
    m.pid = p;
    send(h, p.site, m);
  }
  std::vector<std::pair<SiteId, Message>> outs;
  for (const Tid& k : kids) {
    if (!accessible(h, k.home_site())) continue;
    Message m;
    m.kind = MsgKind::FORCEABT;
    m.tid = k;
    outs.push_back({k.home_site(), m});
  }
  guarded_sends(h, tid, outs);
  TransRecord* self = record_at(h, tid);
  if (!self) return;
  if (self->phase == TxnPhase::ABORT_WAIT_CHILDREN && self->await_children.empty())
    abort_enter_tss_phase(*self);
}

void Engine::h_forceabt(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(s, m.tid);
  if (!r) {
    Message rep;
    rep.kind = MsgKind::RFORCEABT;
    rep.tid = m.tid;
    send(s, e.from, rep);
    return;
  }
  r->reply_forceabt = true;
  r->forceabt_site = e.from;
  if (!r->aborting()) abort_transaction(*r, "forced-by-superior");
}

void Engine::h_rforceabt(const Envelope& e) {
  SiteId h = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(h, *m.tid.parent());
  if (!r || r->phase != TxnPhase::ABORT_WAIT_CHILDREN) return;
  r->await_children.erase(m.tid);
  if (r->await_children.empty()) abort_enter_tss_phase(*r);
}

void Engine::abort_enter_tss_phase(TransRecord& r) {
  SiteId h = r.tid.home_site();
  r.phase = TxnPhase::ABORT_WAIT_TSS;
  r.await_sites.clear();
  auto groups = by_tss(r.files);
  std::vector<std::pair<SiteId, Message>> outs;
  for (const auto& [tss, fl] : groups) {
    if (!accessible(h, tss)) continue;  // that partition sweeps on its own
    r.await_sites.insert(tss);
    Message m;
    m.kind = MsgKind::TSSABORT;
    m.tid = r.tid;
    m.files = fl;
    outs.push_back({tss, m});
  }
  if (outs.empty()) {
    abort_completion(r);
    return;
  }
  guarded_sends(h, r.tid, outs);
}

void Engine::h_tssabort(const Envelope& e) {
  SiteId s = e.to;
  const Message& m = e.msg;
  for (const auto& f : m.files) {
    for (const auto& p : durable_.unresolved_prepared(s)) {
      if (p.tid == m.tid && p.file == f.file) {
        durable_.log_resolved(s, m.tid, f.file, false);
        trace(s, "durable-write",
              "log-resolved tid=" + m.tid.str() + " file=" + f.file + " outcome=abort");
        break;
      }
    }
    sites_[s].locks->tss_abort(f.file, m.tid);
  }
  Message rep;
  rep.kind = MsgKind::RTSSABORT;
  rep.tid = m.tid;
  send(s, e.from, rep);
}

void Engine::h_rtssabort(const Envelope& e) {
  SiteId h = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(h, m.tid);
  if (!r || r->phase != TxnPhase::ABORT_WAIT_TSS) return;
  r->await_sites.erase(e.from);
  if (r->await_sites.empty()) abort_completion(*r);
}

void Engine::abort_completion(TransRecord& r) {
  SiteId h = r.tid.home_site();
  Tid tid = r.tid;
  Pid caller = r.caller;
  bool forced = r.reply_forceabt;
  SiteId forced_site = r.forceabt_site;
  bool notified = r.caller_notified;
  remove_record(h, tid);
  if (forced) {
    if (accessible(h, forced_site)) {
      Message m;
      m.kind = MsgKind::RFORCEABT;
      m.tid = tid;
      send(h, forced_site, m);
    }
    return;
  }
  if (!tid.top_level()) {
    SiteId hp = tid.parent()->home_site();
    if (accessible(h, hp)) {
      Message m;
      m.kind = MsgKind::SUBABORT;
      m.tid = tid;
      m.pid = caller;
      m.code = CompletionCode::ABORTED;
      send(h, hp, m);
    }
    return;
  }
  if (!notified && accessible(h, caller.site)) {
    Message m;
    m.kind = MsgKind::TOPABORT;
    m.tid = tid;
    m.pid = caller;
    m.code = CompletionCode::ABORTED;
    send(h, caller.site, m);
  }
}

void Engine::h_subabort(const Envelope& e) {
  SiteId hp = e.to;
  const Message& m = e.msg;
  TransRecord* r = record_at(hp, *m.tid.parent());
  if (r) {
    for (auto& mem : r->members)
      if (mem.subtrans == m.tid) {
        mem.subtrans = Tid{};
        mem.sub_committing = false;
      }
  }
  if (accessible(hp, m.pid.site)) {
    Message rc;
    rc.kind = MsgKind::RETCODE;
    rc.pid = m.pid;
    rc.subject = m.tid;
    rc.code = CompletionCode::ABORTED;
    send(hp, m.pid.site, rc);
  }
}

// --- topology change --------------------------------------------------------

void Engine::on_topology_change(SiteId s) {
  orphan_sweep_home(s);
  sites_[s].locks->orphan_sweep_all(net_->site_table(s));
  notify_waiters(s);
  abort_on_inaccessible_storage(s);
  resolve_in_doubt(s);
}

void Engine::silent_abort(SiteId s, TransRecord& r, const std::string& why) {
  trace(s, "sweep", "record tid=" + r.tid.str() + " cause=" + why);
  set_status(r, TxnStatus::ABORTED, why);
  std::vector<Pid> members;
  for (const auto& m : r.members) members.push_back(m.pid);
  Tid tid = r.tid;
  remove_record(s, tid);
  // members in this partition are destroyed; members elsewhere are torn down
  // by their own site's sweep
  for (const Pid& p : members) {
    if (p.site == s) {
      destroy_process(p, "transaction-swept");
    } else if (accessible(s, p.site)) {
      Message m;
      m.kind = MsgKind::DESTROY;
      m.pid = p;
      send(s, p.site, m);
    }
  }
}

void Engine::orphan_sweep_home(SiteId s) {
  const auto& table = net_->site_table(s);
  std::vector<Tid> tids;
  for (const auto& [t, r] : sites_[s].records) tids.push_back(t);
  for (const Tid& t : tids) {
    TransRecord* r = record_at(s, t);
    if (!r) continue;
    bool orphan = false;
    for (SiteId cs : chain_sites(t))
      if (!table.count(cs)) orphan = true;
    if (orphan) {
      silent_abort(s, *r, "superior-site-severed");
      continue;
    }
    std::string why;
    for (const auto& m : r->members) {
      if (!table.count(m.pid.site)) {
        why = "member-site-severed";
        break;
      }
      if (m.sub_committing && !m.subtrans.empty() &&
          !table.count(m.subtrans.home_site())) {
        why = "committing-child-severed";
        break;
      }
    }
    if (!why.empty()) {
      if (!r->aborting()) abort_transaction(*r, why);
      continue;
    }
    // running children that are now unreachable are orphans over there; the
    // member entry stops referring to them
    for (auto& m : r->members)
      if (!m.sub_committing && !m.subtrans.empty() &&
          !table.count(m.subtrans.home_site()))
        m.subtrans = Tid{};
    switch (r->phase) {
      case TxnPhase::SUB_WAIT_TSS: {
        bool lost = false;
        for (SiteId a : r->await_sites)
          if (!table.count(a)) lost = true;
        if (lost) finish_subcommit(*r, false);
        break;
      }
      case TxnPhase::TOP_WAIT_TSS: {
        bool lost = false;
        for (SiteId a : r->await_sites)
          if (!table.count(a)) lost = true;
        if (lost) top_abort_decision(*r, "commit-storage-severed");
        break;
      }
      case TxnPhase::TOP_WAIT_VOTES: {
        bool lost = false;
        for (SiteId a : r->await_sites)
          if (!table.count(a)) lost = true;
        if (lost) top_abort_decision(*r, "participant-severed-before-decision");
        break;
      }
      case TxnPhase::TOP_WAIT_ACKS: {
        std::set<SiteId> keep;
        for (SiteId a : r->await_sites)
          if (table.count(a)) keep.insert(a);
        r->await_sites = keep;
        if (r->await_sites.empty()) remove_record(s, t);
        break;
      }
      case TxnPhase::ABORT_WAIT_CHILDREN: {
        std::set<Tid> keep;
        for (const Tid& k : r->await_children)
          if (table.count(k.home_site())) keep.insert(k);
        r->await_children = keep;
        if (r->await_children.empty()) abort_enter_tss_phase(*r);
        break;
      }
      case TxnPhase::ABORT_WAIT_TSS: {
        std::set<SiteId> keep;
        for (SiteId a : r->await_sites)
          if (table.count(a)) keep.insert(a);
        r->await_sites = keep;
        if (r->await_sites.empty()) abort_completion(*r);
        break;
      }
      default:
        break;
    }
  }
  // processes here whose transaction home went away
  for (auto& [pid, pr] : procs_) {
    if (pr.halted || pr.site != s || pr.txn.empty()) continue;
    if (!table.count(pr.txn.home_site())) destroy_process(pid, "home-site-severed");
  }
}

void Engine::notify_waiters(SiteId s) {
  const auto& table = net_->site_table(s);
  for (auto& [pid, pr] : procs_) {
    if (pr.halted || pr.site != s) continue;
    if (pr.wait != Process::Wait::RELCALL) continue;
    if (table.count(pr.wait_site)) continue;
    Tid sub = pr.wait_sub;
    if (pr.txn.empty()) {
      // top-level work severed from its caller: it may still commit over
      // there, so the honest answer is that the outcome is unknown
      pr.codes.push_back(CompletionCode::UNKNOWN_OUTCOME);
      pr.ok_so_far = false;
      trace(s, "status-change",
            "waiter-resumed pid=" + pid.str() + " sub=" + sub.str() + " code=UNKNOWN_OUTCOME");
      pr.wait = Process::Wait::NONE;
      pr.wait_sub = Tid{};
      ++pr.ip;
      schedule_proc(pid, 1);
      continue;
    }
    if (!chain_accessible(pr.txn, table)) continue;  // we are severed ourselves
    // the invoked subtransaction is an orphan in some other partition and
    // will never survive; report it as aborted
    pr.codes.push_back(CompletionCode::ABORTED);
    pr.ok_so_far = false;
    trace(s, "status-change",
          "waiter-resumed pid=" + pid.str() + " sub=" + sub.str() + " code=ABORTED");
    pr.wait = Process::Wait::NONE;
    pr.wait_sub = Tid{};
    ++pr.ip;
    schedule_proc(pid, 1);
  }
}

void Engine::abort_on_inaccessible_storage(SiteId s) {
  const auto& table = net_->site_table(s);
  std::vector<Tid> tids;
  for (const auto& [t, r] : sites_[s].records) tids.push_back(t);
  for (const Tid& t : tids) {
    TransRecord* r = record_at(s, t);
    if (!r || r->phase != TxnPhase::RUNNING) continue;
    for (const auto& f : r->files) {
      if (!table.count(f.tss)) {
        abort_transaction(*r, "storage-site-severed");
        break;
      }
    }
  }
}

void Engine::resolve_in_doubt(SiteId s) {
  const auto& table = net_->site_table(s);
  for (const auto& p : durable_.unresolved_prepared(s)) {
    SiteId coord = p.tid.home_site();
    if (!table.count(coord)) continue;  // still cut off from the decision
    if (durable_.has_commit_point(coord, p.tid)) {
      apply_commit_at(s, p.tid, p.file, p.state, "recovery");
    } else {
      durable_.log_resolved(s, p.tid, p.file, false);
      trace(s, "durable-write",
            "log-resolved tid=" + p.tid.str() + " file=" + p.file + " outcome=abort");
      sites_[s].locks->tss_abort(p.file, p.tid);
    }
  }
}

// --- quiescence review ------------------------------------------------------

std::vector<std::string> Engine::quiescence_violations() const {
  std::vector<std::string> v;
  for (const auto& [s, st] : sites_) {
    for (const auto& [t, r] : st.records) {
      std::ostringstream os;
      os << "record remains at " << s.str() << ": tid=" << t.str()
         << " phase=" << static_cast<int>(r.phase);
      v.push_back(os.str());
    }
    for (const auto& file : st.locks->files()) {
      const TLock* l = st.locks->find(file);
      std::ostringstream os;
      os << "lock state remains at " << s.str() << " file=" << file
         << " holders=" << (l->no_holders() ? "no" : "yes")
         << " retainers=" << (l->no_retainers() ? "no" : "yes")
         << " pending=" << (l->commit_pending ? l->commit_pending->str() : "-");
      v.push_back(os.str());
    }
  }
  for (const auto& [pid, pr] : procs_) {
    if (pr.halted) continue;
    std::ostringstream os;
    os << "process not finished: pid=" << pid.str() << " wait=" << static_cast<int>(pr.wait)
       << " ip=" << pr.ip;
    v.push_back(os.str());
  }
  return v;
}

}  // namespace ntx
