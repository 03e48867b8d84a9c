#include <doctest.h>

#include <string>

#include "ntx/scenario.hpp"

using namespace ntx;

namespace {

const char* kFull = R"(# two sites, one shared file
page-size 512
retry-limit 5
step-limit 9000
site s1
site s2

file shared replicas s1,s2 pages "hello" "" "third page"
file local replicas s2

proc main at s1 runs driver

script driver
  relcall child at s2
  fork sidekick at s1
  wait
  open shared write
  read shared 0
  write shared 1 "spaced text"
  close shared
  sleep 3
  exit ifall
end

script child
  open local read
  close local
  exit success
end

script sidekick
  exit failure
end

fault vote-no shared s2
fault at-step 40 partition s1 | s2
fault before-deliver PREPARE s1 s2 partition s1 s2
fault on-quiescent partition s1 s2

assert code main 0 COMMITTED
assert fate s1.t1 ABORTED
assert durable shared s1 pages "hello" "spaced text" "third page"
assert current shared s2 pages "x"
assert write-retainers shared s1 s1.t1,s1.t1/s2.t1
assert read-retainers local s2 none
assert tlock-absent local s2
assert no-tlocks
assert counter commit-remote <= 12
assert no-orphans
)";

}  // namespace

TEST_CASE("full scenario parses into the declared shape") {
  Scenario sc = parse_scenario(kFull, "full");
  CHECK(sc.name == "full");
  CHECK(sc.page_size == 512);
  CHECK(sc.retry_limit == 5);
  CHECK(sc.step_limit == 9000);
  REQUIRE(sc.sites.size() == 2);
  CHECK(sc.has_site(SiteId{2}));
  CHECK_FALSE(sc.has_site(SiteId{3}));

  REQUIRE(sc.files.size() == 2);
  CHECK(sc.files[0].name == "shared");
  CHECK(sc.files[0].replicas == std::vector<SiteId>{SiteId{1}, SiteId{2}});
  REQUIRE(sc.files[0].pages.size() == 3);
  CHECK(sc.files[0].pages[1] == "");
  CHECK(sc.files[0].pages[2] == "third page");
  CHECK(sc.files[1].pages.empty());

  REQUIRE(sc.procs.size() == 1);
  CHECK(sc.procs[0].site == SiteId{1});
  CHECK(sc.procs[0].script == "driver");

  REQUIRE(sc.scripts.count("driver"));
  const Script& d = sc.scripts.at("driver");
  REQUIRE(d.ops.size() == 9);
  CHECK(d.ops[0].kind == ScriptOp::Kind::RELCALL);
  CHECK(d.ops[0].program == "child");
  CHECK(d.ops[0].site == SiteId{2});
  CHECK(d.ops[1].kind == ScriptOp::Kind::FORK);
  CHECK(d.ops[2].kind == ScriptOp::Kind::WAIT);
  CHECK(d.ops[3].mode == LockMode::WRITE);
  CHECK(d.ops[5].data == "spaced text");
  CHECK(d.ops[7].steps == 3);
  CHECK(d.ops[8].how == ScriptOp::ExitHow::IF_ALL);

  REQUIRE(sc.faults.size() == 4);
  CHECK(sc.faults[0].what == Fault::What::VOTE_NO);
  CHECK(sc.faults[0].file == "shared");
  CHECK(sc.faults[1].when == Fault::When::AT_STEP);
  CHECK(sc.faults[1].step == 40);
  REQUIRE(sc.faults[1].groups.size() == 2);
  CHECK(sc.faults[2].when == Fault::When::BEFORE_DELIVER);
  CHECK(sc.faults[2].msg == "PREPARE");
  CHECK(sc.faults[2].from == SiteId{1});
  CHECK(sc.faults[3].when == Fault::When::ON_QUIESCENT);

  REQUIRE(sc.assertions.size() == 10);
  CHECK(sc.assertions[0].kind == Assertion::Kind::CODE);
  CHECK(sc.assertions[0].proc == "main");
  CHECK(sc.assertions[0].code == CompletionCode::COMMITTED);
  CHECK(sc.assertions[1].kind == Assertion::Kind::FATE);
  CHECK(sc.assertions[1].tid == Tid::top_level(SiteId{1}, 1));
  CHECK(sc.assertions[2].pages.size() == 3);
  REQUIRE(sc.assertions[4].tids.size() == 2);
  CHECK(sc.assertions[4].tids[1] == Tid::top_level(SiteId{1}, 1).child(SiteId{2}, 1));
  CHECK(sc.assertions[5].tids.empty());
  CHECK(sc.assertions[8].op == "<=");
  CHECK(sc.assertions[8].value == 12);
}

TEST_CASE("render and reparse reach a fixed point") {
  Scenario sc = parse_scenario(kFull, "full");
  std::string once = render_scenario(sc);
  Scenario sc2 = parse_scenario(once, "full");
  std::string twice = render_scenario(sc2);
  CHECK(once == twice);

  CHECK(sc2.sites == sc.sites);
  CHECK(sc2.scripts.size() == sc.scripts.size());
  CHECK(sc2.faults.size() == sc.faults.size());
  CHECK(sc2.assertions.size() == sc.assertions.size());
  CHECK(sc2.scripts.at("driver").ops.size() == 9);
}

TEST_CASE("parse failures carry the offending line") {
  auto bad = [](const std::string& text) {
    CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
  };

  bad("");                                    // no sites
  bad("site s1\nsite s1\n");                  // duplicate site
  bad("site s1\nsite x9\n");                  // malformed site name
  bad("site s1\nfile f replicas s2\n");       // replica at unknown site
  bad("site s1\nfile f replicas s1 pages x\n");  // unquoted page
  bad("site s1\nproc p at s1 runs missing\n");   // unknown script
  bad("site s1\nscript a\n open f read\nend\n"); // unknown file
  bad("site s1\nscript a\n open f sideways\nend\n");
  bad("site s1\nscript a\n exit maybe\nend\n");
  bad("site s1\nscript a\n relcall b at s9\nend\nscript b\nend\n");  // bad target
  bad("site s1\nscript a\n flip f\nend\n");   // unknown op
  bad("site s1\nscript a\n");                 // missing end
  bad("site s1\nfile f replicas s1 pages \"unterminated\n");
  bad("site s1\nsite s2\nfault at-step 5 partition s1\n");          // misses s2
  bad("site s1\nsite s2\nfault at-step 5 partition s1 s2 s1\n");    // s1 twice
  bad("site s1\nfault at-step 5 partition s1 | | s1\n");            // empty group
  bad("site s1\nfault at-step 9 partition s1\nfault at-step 9 partition s1\n");
  bad("site s1\nfault whenever partition s1\n");
  bad("site s1\nassert code p zero COMMITTED\n");
  bad("site s1\nassert fate s1.t1 MAYBE\n");
  bad("site s1\nassert counter x != 3\n");
  bad("site s1\nassert nonsense\n");
  bad("site s1\nwhatever\n");

  // Forward references between scripts are fine.
  CHECK_NOTHROW(parse_scenario(
      "site s1\nscript a\n relcall b at s1\nend\nscript b\n exit success\nend\n"));
}

TEST_CASE("comments and spacing are immaterial") {
  Scenario sc = parse_scenario(
      "  site   s1   # trailing comment\n"
      "\n"
      "# whole line comment\n"
      "script a\n"
      "    exit success\n"
      "end\n");
  CHECK(sc.sites.size() == 1);
  CHECK(sc.scripts.at("a").ops.size() == 1);
}

TEST_CASE("defaults apply when settings are omitted") {
  Scenario sc = parse_scenario("site s4\n");
  CHECK(sc.page_size == 1024);
  CHECK(sc.retry_limit == 3);
  CHECK(sc.step_limit == 50000);
  CHECK(sc.sites == std::vector<SiteId>{SiteId{4}});
}
