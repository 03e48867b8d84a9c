#include "ntx/runner.hpp"

#include <sstream>

namespace ntx {

namespace {

std::string join_pages(const std::vector<std::string>& pages) {
  std::ostringstream os;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (i) os << ' ';
    os << '"' << pages[i] << '"';
  }
  return os.str();
}

std::string join_tids(const std::vector<Tid>& tids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < tids.size(); ++i) {
    if (i) os << ',';
    os << tids[i].str();
  }
  return os.str();
}

}  // namespace

std::vector<std::string> evaluate_assertions(const Engine& eng, const Scenario& sc) {
  std::vector<std::string> out;
  auto fail = [&](const Assertion& a, const std::string& why) {
    out.push_back("expect failed: " + a.text + " (" + why + ")");
  };

  for (const auto& a : sc.assertions) {
    switch (a.kind) {
      case Assertion::Kind::CODE: {
        const Process* p = eng.process_by_name(a.proc);
        if (!p) {
          fail(a, "no such process");
          break;
        }
        if (a.index < 0 || static_cast<std::size_t>(a.index) >= p->codes.size()) {
          std::ostringstream os;
          os << "only " << p->codes.size() << " completions";
          fail(a, os.str());
          break;
        }
        CompletionCode got = p->codes[static_cast<std::size_t>(a.index)];
        if (got != a.code) fail(a, std::string("got ") + to_string(got));
        break;
      }
      case Assertion::Kind::FATE: {
        auto it = eng.fates().find(a.tid);
        if (it == eng.fates().end()) {
          fail(a, "transaction never existed");
          break;
        }
        if (a.status != to_string(it->second))
          fail(a, std::string("got ") + to_string(it->second));
        break;
      }
      case Assertion::Kind::DURABLE: {
        if (!eng.durable().has_replica(a.file, a.site)) {
          fail(a, "no replica at site");
          break;
        }
        auto got = eng.durable().state(a.file, a.site).pages();
        if (got != a.pages) fail(a, "got " + join_pages(got));
        break;
      }
      case Assertion::Kind::CURRENT: {
        const TLock* l = eng.locks(a.site).find(a.file);
        if (!l) {
          fail(a, "no t-lock");
          break;
        }
        auto got = l->current.pages();
        if (got != a.pages) fail(a, "got " + join_pages(got));
        break;
      }
      case Assertion::Kind::WRITE_RETAINERS: {
        const TLock* l = eng.locks(a.site).find(a.file);
        std::vector<Tid> got;
        if (l)
          for (const auto& e : l->write_retainers) got.push_back(e.tid);
        if (got != a.tids) fail(a, "got " + (got.empty() ? "none" : join_tids(got)));
        break;
      }
      case Assertion::Kind::READ_RETAINERS: {
        const TLock* l = eng.locks(a.site).find(a.file);
        std::vector<Tid> got;
        if (l)
          for (const auto& t : l->read_retainers) got.push_back(t);
        if (got != a.tids) fail(a, "got " + (got.empty() ? "none" : join_tids(got)));
        break;
      }
      case Assertion::Kind::TLOCK_ABSENT: {
        if (eng.locks(a.site).has(a.file)) fail(a, "t-lock still present");
        break;
      }
      case Assertion::Kind::NO_TLOCKS: {
        for (SiteId s : sc.sites) {
          if (eng.locks(s).lock_count() != 0) {
            fail(a, "locks remain at " + s.str());
            break;
          }
        }
        break;
      }
      case Assertion::Kind::COUNTER: {
        long got = eng.counter(a.counter);
        bool ok = a.op == "==" ? got == a.value
                  : a.op == "<=" ? got <= a.value
                                 : got >= a.value;
        if (!ok) {
          std::ostringstream os;
          os << "got " << got;
          fail(a, os.str());
        }
        break;
      }
      case Assertion::Kind::NO_ORPHANS: {
        for (const auto& v : eng.violations()) fail(a, v);
        for (const auto& v : eng.quiescence_violations()) fail(a, v);
        break;
      }
    }
  }
  return out;
}

RunOutcome run_scenario(const Scenario& sc, bool check_mode) {
  RunOutcome out;
  out.trace = std::make_unique<Trace>();
  Engine::Options opt;
  opt.check_invariants = check_mode;
  out.engine = std::make_unique<Engine>(sc, out.trace.get(), opt);
  try {
    out.engine->run();
  } catch (const LivelockError& e) {
    out.livelock = true;
    out.failures.push_back(e.what());
    return out;
  }
  auto fails = evaluate_assertions(*out.engine, sc);
  out.failures.insert(out.failures.end(), fails.begin(), fails.end());
  for (const auto& v : out.engine->violations())
    out.failures.push_back("invariant: " + v);
  if (check_mode) {
    for (const auto& v : out.engine->quiescence_violations())
      out.failures.push_back("leftover: " + v);
  }
  return out;
}

}  // namespace ntx
