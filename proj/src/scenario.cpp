#include "ntx/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ntx {

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

// Whitespace-separated tokens; a double-quoted token keeps its spaces and
// may be empty.  No escape sequences.
std::vector<Token> tokenize(const std::string& line, int lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    if (line[i] == '#') break;
    if (line[i] == '"') {
      std::size_t end = line.find('"', i + 1);
      if (end == std::string::npos)
        throw ScenarioError("line " + std::to_string(lineno) + ": unterminated quote");
      out.push_back({line.substr(i + 1, end - i - 1), true});
      i = end + 1;
      continue;
    }
    std::size_t end = i;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])) &&
           line[end] != '"')
      ++end;
    out.push_back({line.substr(i, end - i), false});
    i = end;
  }
  return out;
}

[[noreturn]] void fail(int lineno, const std::string& what) {
  throw ScenarioError("line " + std::to_string(lineno) + ": " + what);
}

SiteId parse_site(const std::string& s, int lineno) {
  if (s.size() < 2 || s[0] != 's') fail(lineno, "bad site name '" + s + "'");
  try {
    return SiteId{std::stoi(s.substr(1))};
  } catch (const std::exception&) {
    fail(lineno, "bad site name '" + s + "'");
  }
}

std::vector<SiteId> parse_site_list(const std::string& s, int lineno) {
  std::vector<SiteId> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    out.push_back(parse_site(s.substr(pos, end - pos), lineno));
    if (end == s.size()) break;
    pos = end + 1;
  }
  return out;
}

long parse_num(const std::string& s, int lineno) {
  try {
    return std::stol(s);
  } catch (const std::exception&) {
    fail(lineno, "bad number '" + s + "'");
  }
}

Tid parse_tid(const std::string& s, int lineno) {
  auto t = Tid::parse(s);
  if (!t) fail(lineno, "bad transaction id '" + s + "'");
  return *t;
}

std::vector<std::vector<SiteId>> parse_groups(const std::vector<Token>& toks,
                                              std::size_t start, int lineno) {
  std::vector<std::vector<SiteId>> groups(1);
  for (std::size_t i = start; i < toks.size(); ++i) {
    if (toks[i].text == "|") {
      groups.emplace_back();
    } else {
      groups.back().push_back(parse_site(toks[i].text, lineno));
    }
  }
  for (const auto& g : groups)
    if (g.empty()) fail(lineno, "empty partition group");
  return groups;
}

}  // namespace

bool Scenario::has_site(SiteId s) const {
  return std::find(sites.begin(), sites.end(), s) != sites.end();
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
  Scenario sc;
  sc.name = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Script* open_script = nullptr;
  long last_fault_step = -1;

  while (std::getline(in, line)) {
    ++lineno;
    auto toks = tokenize(line, lineno);
    if (toks.empty()) continue;
    const std::string& head = toks[0].text;

    if (open_script) {
      ScriptOp op;
      if (head == "end") {
        open_script = nullptr;
      } else if (head == "relcall" || head == "fork") {
        if (toks.size() != 4 || toks[2].text != "at") fail(lineno, head + " wants: " + head + " SCRIPT at SITE");
        op.kind = head == "relcall" ? ScriptOp::Kind::RELCALL : ScriptOp::Kind::FORK;
        op.program = toks[1].text;
        op.site = parse_site(toks[3].text, lineno);
        open_script->ops.push_back(op);
      } else if (head == "wait") {
        op.kind = ScriptOp::Kind::WAIT;
        open_script->ops.push_back(op);
      } else if (head == "open") {
        if (toks.size() != 3) fail(lineno, "open wants: open FILE read|write");
        op.kind = ScriptOp::Kind::OPEN;
        op.file = toks[1].text;
        if (toks[2].text == "read")
          op.mode = LockMode::READ;
        else if (toks[2].text == "write")
          op.mode = LockMode::WRITE;
        else
          fail(lineno, "open mode must be read or write");
        open_script->ops.push_back(op);
      } else if (head == "read") {
        if (toks.size() != 3) fail(lineno, "read wants: read FILE PAGE");
        op.kind = ScriptOp::Kind::READ;
        op.file = toks[1].text;
        op.page = static_cast<int>(parse_num(toks[2].text, lineno));
        open_script->ops.push_back(op);
      } else if (head == "write") {
        if (toks.size() != 4) fail(lineno, "write wants: write FILE PAGE \"text\"");
        op.kind = ScriptOp::Kind::WRITE;
        op.file = toks[1].text;
        op.page = static_cast<int>(parse_num(toks[2].text, lineno));
        op.data = toks[3].text;
        open_script->ops.push_back(op);
      } else if (head == "close") {
        if (toks.size() != 2) fail(lineno, "close wants: close FILE");
        op.kind = ScriptOp::Kind::CLOSE;
        op.file = toks[1].text;
        open_script->ops.push_back(op);
      } else if (head == "sleep") {
        if (toks.size() != 2) fail(lineno, "sleep wants: sleep STEPS");
        op.kind = ScriptOp::Kind::SLEEP;
        op.steps = parse_num(toks[1].text, lineno);
        open_script->ops.push_back(op);
      } else if (head == "exit") {
        if (toks.size() != 2) fail(lineno, "exit wants: exit success|failure|ifall");
        op.kind = ScriptOp::Kind::EXIT;
        if (toks[1].text == "success")
          op.how = ScriptOp::ExitHow::SUCCESS;
        else if (toks[1].text == "failure")
          op.how = ScriptOp::ExitHow::FAILURE;
        else if (toks[1].text == "ifall")
          op.how = ScriptOp::ExitHow::IF_ALL;
        else
          fail(lineno, "exit must be success, failure or ifall");
        open_script->ops.push_back(op);
      } else {
        fail(lineno, "unknown script op '" + head + "'");
      }
      continue;
    }

    if (head == "page-size") {
      sc.page_size = static_cast<std::size_t>(parse_num(toks.at(1).text, lineno));
    } else if (head == "retry-limit") {
      sc.retry_limit = static_cast<int>(parse_num(toks.at(1).text, lineno));
    } else if (head == "step-limit") {
      sc.step_limit = parse_num(toks.at(1).text, lineno);
    } else if (head == "site") {
      if (toks.size() != 2) fail(lineno, "site wants: site NAME");
      SiteId s = parse_site(toks[1].text, lineno);
      if (sc.has_site(s)) fail(lineno, "duplicate site " + s.str());
      sc.sites.push_back(s);
    } else if (head == "file") {
      if (toks.size() < 4 || toks[2].text != "replicas")
        fail(lineno, "file wants: file NAME replicas S,S [pages \"..\" ..]");
      FileDecl f;
      f.name = toks[1].text;
      f.replicas = parse_site_list(toks[3].text, lineno);
      if (toks.size() > 4) {
        if (toks[4].text != "pages") fail(lineno, "expected 'pages'");
        for (std::size_t i = 5; i < toks.size(); ++i) {
          if (!toks[i].quoted) fail(lineno, "page contents must be quoted");
          f.pages.push_back(toks[i].text);
        }
      }
      for (const auto& g : sc.files)
        if (g.name == f.name) fail(lineno, "duplicate file " + f.name);
      sc.files.push_back(std::move(f));
    } else if (head == "proc") {
      if (toks.size() != 6 || toks[2].text != "at" || toks[4].text != "runs")
        fail(lineno, "proc wants: proc NAME at SITE runs SCRIPT");
      ProcDecl p;
      p.name = toks[1].text;
      p.site = parse_site(toks[3].text, lineno);
      p.script = toks[5].text;
      for (const auto& q : sc.procs)
        if (q.name == p.name) fail(lineno, "duplicate proc " + p.name);
      sc.procs.push_back(std::move(p));
    } else if (head == "script") {
      if (toks.size() != 2) fail(lineno, "script wants: script NAME");
      const std::string& sname = toks[1].text;
      if (sc.scripts.count(sname)) fail(lineno, "duplicate script " + sname);
      open_script = &sc.scripts.emplace(sname, Script{sname, {}}).first->second;
    } else if (head == "fault") {
      if (toks.size() < 2) fail(lineno, "empty fault");
      Fault f;
      const std::string& w = toks[1].text;
      std::size_t rest;
      if (w == "at-step") {
        f.when = Fault::When::AT_STEP;
        f.step = parse_num(toks.at(2).text, lineno);
        if (f.step <= last_fault_step)
          fail(lineno, "fault steps must be strictly increasing");
        last_fault_step = f.step;
        rest = 3;
      } else if (w == "before-deliver" || w == "after-deliver") {
        f.when = w == "before-deliver" ? Fault::When::BEFORE_DELIVER
                                       : Fault::When::AFTER_DELIVER;
        f.msg = toks.at(2).text;
        f.from = parse_site(toks.at(3).text, lineno);
        f.to = parse_site(toks.at(4).text, lineno);
        rest = 5;
      } else if (w == "on-quiescent") {
        f.when = Fault::When::ON_QUIESCENT;
        rest = 2;
      } else if (w == "vote-no") {
        f.when = Fault::When::AT_STEP;
        f.step = -1;
        f.what = Fault::What::VOTE_NO;
        f.file = toks.at(2).text;
        f.site = parse_site(toks.at(3).text, lineno);
        sc.faults.push_back(std::move(f));
        continue;
      } else {
        fail(lineno, "unknown fault trigger '" + w + "'");
      }
      if (toks.at(rest).text != "partition")
        fail(lineno, "expected 'partition'");
      f.what = Fault::What::PARTITION;
      f.groups = parse_groups(toks, rest + 1, lineno);
      sc.faults.push_back(std::move(f));
    } else if (head == "assert") {
      if (toks.size() < 2) fail(lineno, "empty assert");
      Assertion a;
      a.text = line;
      const std::string& k = toks[1].text;
      if (k == "code") {
        a.kind = Assertion::Kind::CODE;
        a.proc = toks.at(2).text;
        a.index = static_cast<int>(parse_num(toks.at(3).text, lineno));
        const std::string& c = toks.at(4).text;
        if (c == "COMMITTED")
          a.code = CompletionCode::COMMITTED;
        else if (c == "ABORTED")
          a.code = CompletionCode::ABORTED;
        else if (c == "UNKNOWN_OUTCOME")
          a.code = CompletionCode::UNKNOWN_OUTCOME;
        else
          fail(lineno, "bad completion code '" + c + "'");
      } else if (k == "fate") {
        a.kind = Assertion::Kind::FATE;
        a.tid = parse_tid(toks.at(2).text, lineno);
        a.status = toks.at(3).text;
        if (a.status != "COMMITTED" && a.status != "ABORTED")
          fail(lineno, "fate must be COMMITTED or ABORTED");
      } else if (k == "durable" || k == "current") {
        a.kind = k == "durable" ? Assertion::Kind::DURABLE : Assertion::Kind::CURRENT;
        a.file = toks.at(2).text;
        a.site = parse_site(toks.at(3).text, lineno);
        if (toks.at(4).text != "pages") fail(lineno, "expected 'pages'");
        for (std::size_t i = 5; i < toks.size(); ++i) {
          if (!toks[i].quoted) fail(lineno, "page contents must be quoted");
          a.pages.push_back(toks[i].text);
        }
      } else if (k == "write-retainers" || k == "read-retainers") {
        a.kind = k == "write-retainers" ? Assertion::Kind::WRITE_RETAINERS
                                        : Assertion::Kind::READ_RETAINERS;
        a.file = toks.at(2).text;
        a.site = parse_site(toks.at(3).text, lineno);
        const std::string& list = toks.at(4).text;
        if (list != "none") {
          std::size_t pos = 0;
          while (pos <= list.size()) {
            std::size_t end = list.find(',', pos);
            if (end == std::string::npos) end = list.size();
            a.tids.push_back(parse_tid(list.substr(pos, end - pos), lineno));
            if (end == list.size()) break;
            pos = end + 1;
          }
        }
      } else if (k == "tlock-absent") {
        a.kind = Assertion::Kind::TLOCK_ABSENT;
        a.file = toks.at(2).text;
        a.site = parse_site(toks.at(3).text, lineno);
      } else if (k == "no-tlocks") {
        a.kind = Assertion::Kind::NO_TLOCKS;
      } else if (k == "counter") {
        a.kind = Assertion::Kind::COUNTER;
        a.counter = toks.at(2).text;
        a.op = toks.at(3).text;
        if (a.op != "<=" && a.op != ">=" && a.op != "==")
          fail(lineno, "counter op must be <=, >= or ==");
        a.value = parse_num(toks.at(4).text, lineno);
      } else if (k == "no-orphans") {
        a.kind = Assertion::Kind::NO_ORPHANS;
      } else {
        fail(lineno, "unknown assertion '" + k + "'");
      }
      sc.assertions.push_back(std::move(a));
    } else {
      fail(lineno, "unknown directive '" + head + "'");
    }
  }

  if (open_script) throw ScenarioError("script '" + open_script->name + "' missing end");

  // Cross checks.
  if (sc.sites.empty()) throw ScenarioError("no sites declared");
  for (const auto& f : sc.files) {
    if (f.replicas.empty()) throw ScenarioError("file " + f.name + " has no replicas");
    for (SiteId s : f.replicas)
      if (!sc.has_site(s))
        throw ScenarioError("file " + f.name + " replicated at unknown site " + s.str());
  }
  for (const auto& p : sc.procs) {
    if (!sc.has_site(p.site))
      throw ScenarioError("proc " + p.name + " at unknown site " + p.site.str());
    if (!sc.scripts.count(p.script))
      throw ScenarioError("proc " + p.name + " runs unknown script " + p.script);
  }
  auto file_known = [&](const std::string& n) {
    for (const auto& f : sc.files)
      if (f.name == n) return true;
    return false;
  };
  for (const auto& [_, s] : sc.scripts) {
    for (const auto& op : s.ops) {
      if ((op.kind == ScriptOp::Kind::RELCALL || op.kind == ScriptOp::Kind::FORK)) {
        if (!sc.scripts.count(op.program))
          throw ScenarioError("script " + s.name + " references unknown script " + op.program);
        if (!sc.has_site(op.site))
          throw ScenarioError("script " + s.name + " targets unknown site " + op.site.str());
      }
      if (op.kind == ScriptOp::Kind::OPEN || op.kind == ScriptOp::Kind::READ ||
          op.kind == ScriptOp::Kind::WRITE || op.kind == ScriptOp::Kind::CLOSE) {
        if (!file_known(op.file))
          throw ScenarioError("script " + s.name + " touches unknown file " + op.file);
      }
    }
  }
  for (const auto& f : sc.faults) {
    if (f.what == Fault::What::PARTITION) {
      std::set<SiteId> seen;
      for (const auto& g : f.groups)
        for (SiteId s : g) {
          if (!sc.has_site(s))
            throw ScenarioError("fault partitions unknown site " + s.str());
          if (!seen.insert(s).second)
            throw ScenarioError("fault lists site " + s.str() + " twice");
        }
      if (seen.size() != sc.sites.size())
        throw ScenarioError("fault partition must mention every site");
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string base = path;
  std::size_t slash = base.find_last_of('/');
  if (slash != std::string::npos) base = base.substr(slash + 1);
  return parse_scenario(buf.str(), base);
}

std::string render_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "page-size " << sc.page_size << "\n";
  os << "retry-limit " << sc.retry_limit << "\n";
  os << "step-limit " << sc.step_limit << "\n";
  for (SiteId s : sc.sites) os << "site " << s.str() << "\n";
  for (const auto& f : sc.files) {
    os << "file " << f.name << " replicas ";
    for (std::size_t i = 0; i < f.replicas.size(); ++i) {
      if (i) os << ',';
      os << f.replicas[i].str();
    }
    if (!f.pages.empty()) {
      os << " pages";
      for (const auto& p : f.pages) os << " \"" << p << '"';
    }
    os << "\n";
  }
  for (const auto& p : sc.procs)
    os << "proc " << p.name << " at " << p.site.str() << " runs " << p.script << "\n";
  for (const auto& [_, s] : sc.scripts) {
    os << "script " << s.name << "\n";
    for (const auto& op : s.ops) {
      os << "  ";
      switch (op.kind) {
        case ScriptOp::Kind::RELCALL:
          os << "relcall " << op.program << " at " << op.site.str();
          break;
        case ScriptOp::Kind::FORK:
          os << "fork " << op.program << " at " << op.site.str();
          break;
        case ScriptOp::Kind::WAIT: os << "wait"; break;
        case ScriptOp::Kind::OPEN:
          os << "open " << op.file << ' ' << to_string(op.mode);
          break;
        case ScriptOp::Kind::READ: os << "read " << op.file << ' ' << op.page; break;
        case ScriptOp::Kind::WRITE:
          os << "write " << op.file << ' ' << op.page << " \"" << op.data << '"';
          break;
        case ScriptOp::Kind::CLOSE: os << "close " << op.file; break;
        case ScriptOp::Kind::SLEEP: os << "sleep " << op.steps; break;
        case ScriptOp::Kind::EXIT:
          os << "exit "
             << (op.how == ScriptOp::ExitHow::SUCCESS   ? "success"
                 : op.how == ScriptOp::ExitHow::FAILURE ? "failure"
                                                         : "ifall");
          break;
      }
      os << "\n";
    }
    os << "end\n";
  }
  for (const auto& f : sc.faults) {
    if (f.what == Fault::What::VOTE_NO) {
      os << "fault vote-no " << f.file << ' ' << f.site.str() << "\n";
      continue;
    }
    os << "fault ";
    switch (f.when) {
      case Fault::When::AT_STEP: os << "at-step " << f.step; break;
      case Fault::When::BEFORE_DELIVER:
        os << "before-deliver " << f.msg << ' ' << f.from.str() << ' ' << f.to.str();
        break;
      case Fault::When::AFTER_DELIVER:
        os << "after-deliver " << f.msg << ' ' << f.from.str() << ' ' << f.to.str();
        break;
      case Fault::When::ON_QUIESCENT: os << "on-quiescent"; break;
    }
    os << " partition";
    for (std::size_t g = 0; g < f.groups.size(); ++g) {
      if (g) os << " |";
      for (SiteId s : f.groups[g]) os << ' ' << s.str();
    }
    os << "\n";
  }
  for (const auto& a : sc.assertions) os << a.text << "\n";
  return os.str();
}

}  // namespace ntx
