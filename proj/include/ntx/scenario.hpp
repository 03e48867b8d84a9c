#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ntx/ids.hpp"
#include "ntx/net.hpp"

namespace ntx {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScriptOp {
  enum class Kind { RELCALL, FORK, WAIT, OPEN, READ, WRITE, CLOSE, SLEEP, EXIT };
  Kind kind{};
  std::string program;     // RELCALL script / FORK script
  SiteId site;             // RELCALL / FORK target
  std::string file;        // OPEN/READ/WRITE/CLOSE
  LockMode mode{};         // OPEN
  int page = 0;            // READ/WRITE
  std::string data;        // WRITE
  long steps = 0;          // SLEEP
  enum class ExitHow { SUCCESS, FAILURE, IF_ALL };
  ExitHow how{};           // EXIT
};

struct Script {
  std::string name;
  std::vector<ScriptOp> ops;
};

struct ProcDecl {
  std::string name;   // root driver name, also the key for code assertions
  SiteId site;
  std::string script;
};

struct FileDecl {
  std::string name;
  std::vector<SiteId> replicas;
  std::vector<std::string> pages;
};

struct Fault {
  enum class When { AT_STEP, BEFORE_DELIVER, AFTER_DELIVER, ON_QUIESCENT };
  enum class What { PARTITION, VOTE_NO };
  When when{};
  What what{};
  long step = 0;                       // AT_STEP
  std::string msg;                     // *_DELIVER: message name
  SiteId from, to;                     // *_DELIVER endpoints
  std::vector<std::vector<SiteId>> groups;  // PARTITION
  std::string file;                    // VOTE_NO
  SiteId site;                         // VOTE_NO
};

struct Assertion {
  enum class Kind {
    CODE,             // proc idx code
    FATE,             // tid status
    DURABLE,          // file site pages
    CURRENT,          // file site pages (t-lock current state)
    WRITE_RETAINERS,  // file site tid-list (bottom first) or none
    READ_RETAINERS,   // file site tid-list or none
    TLOCK_ABSENT,     // file site
    NO_TLOCKS,        //
    COUNTER,          // name op value
    NO_ORPHANS,       //
  };
  Kind kind{};
  std::string proc;
  int index = 0;
  CompletionCode code{};
  Tid tid;
  std::string status;  // COMMITTED|ABORTED
  std::string file;
  SiteId site;
  std::vector<std::string> pages;
  std::vector<Tid> tids;
  std::string counter, op;
  long value = 0;
  std::string text;  // original line for reporting
};

struct Scenario {
  std::string name;
  std::size_t page_size = 1024;
  int retry_limit = 3;
  long step_limit = 50000;
  std::vector<SiteId> sites;
  std::vector<FileDecl> files;
  std::vector<ProcDecl> procs;
  std::map<std::string, Script> scripts;
  std::vector<Fault> faults;
  std::vector<Assertion> assertions;

  bool has_site(SiteId s) const;
};

Scenario parse_scenario(const std::string& text, const std::string& name = "scenario");
Scenario load_scenario(const std::string& path);
std::string render_scenario(const Scenario& sc);

}  // namespace ntx
