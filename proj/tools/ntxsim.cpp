#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ntx/fuzz.hpp"
#include "ntx/oracle.hpp"
#include "ntx/runner.hpp"
#include "ntx/scenario.hpp"

namespace {

int cmd_run(const std::string& path, bool trace, bool check) {
  ntx::Scenario sc;
  try {
    sc = ntx::load_scenario(path);
  } catch (const ntx::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  }
  auto out = ntx::run_scenario(sc, check);
  if (trace) out.trace->dump(std::cout);
  if (!out.failures.empty()) {
    for (const auto& f : out.failures) std::cerr << "FAIL " << f << "\n";
    return 1;
  }
  std::cout << sc.name << ": ok ("
            << out.engine->net().totals().remote << " messages, "
            << out.engine->net().totals().local << " local calls, "
            << out.engine->durable().total_page_writes() << " page writes)\n";
  return 0;
}

int cmd_metrics(const std::string& path) {
  ntx::Scenario sc;
  try {
    sc = ntx::load_scenario(path);
  } catch (const ntx::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  }
  auto out = ntx::run_scenario(sc, false);
  if (!out.failures.empty()) {
    for (const auto& f : out.failures) std::cerr << "FAIL " << f << "\n";
    return 1;
  }
  std::cout << "phase      remote   local   dropped\n";
  for (const auto& [phase, c] : out.engine->net().counters_by_phase()) {
    std::cout << phase;
    for (std::size_t i = phase.size(); i < 11; ++i) std::cout << ' ';
    std::cout << c.remote << "\t " << c.local << "\t " << c.dropped << "\n";
  }
  auto t = out.engine->net().totals();
  std::cout << "total      " << t.remote << "\t " << t.local << "\t " << t.dropped << "\n";
  std::cout << "durable page writes: " << out.engine->durable().total_page_writes() << "\n";
  return 0;
}

int cmd_fuzz(std::uint64_t seed, int count, bool keep_going) {
  int bad = 0;
  for (int i = 0; i < count; ++i) {
    auto r = ntx::fuzz_one(seed + static_cast<std::uint64_t>(i));
    if (!r.ok) {
      ++bad;
      std::cerr << r.detail << "\n";
      if (!keep_going) return 1;
    }
  }
  std::cout << count << " workloads, " << bad << " failures\n";
  return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested transaction engine simulator"};
  app.require_subcommand(1);

  std::string path;
  bool trace = false;

  auto* run = app.add_subcommand("run", "run a scenario and evaluate its expectations");
  run->add_option("scenario", path, "scenario file")->required();
  run->add_flag("--trace", trace, "dump the event trace");

  auto* check = app.add_subcommand(
      "check", "run with invariant checking and leftover-state review");
  check->add_option("scenario", path, "scenario file")->required();
  check->add_flag("--trace", trace, "dump the event trace");

  auto* metrics = app.add_subcommand("metrics", "run and print per-phase message counts");
  metrics->add_option("scenario", path, "scenario file")->required();

  std::uint64_t seed = 1;
  int count = 100;
  bool keep_going = false;
  auto* fuzz = app.add_subcommand("fuzz", "run seeded random workloads");
  fuzz->add_option("--seed", seed, "first seed");
  fuzz->add_option("--count", count, "number of workloads");
  fuzz->add_flag("--keep-going", keep_going, "report all failures instead of stopping");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(path, trace, false);
  if (check->parsed()) return cmd_run(path, trace, true);
  if (metrics->parsed()) return cmd_metrics(path);
  if (fuzz->parsed()) return cmd_fuzz(seed, count, keep_going);
  return 2;
}
