// blochhom: band analysis, effective model and convergence runs from a JSON config.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid input, 3 hypothesis violated,
// 4 numerical failure.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "blochhom/cli_io.hpp"

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw blochhom::InputError(fmt::format("cannot read config '{}'", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch-wave homogenization of stochastic Schrodinger equations"};
  app.set_version_flag("--version", blochhom::tool_version());

  std::string command;
  std::string stage;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;

  std::string names;
  for (const auto& n : blochhom::command_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("command", command, "One of: " + names)->check(CLI::IsMember(blochhom::command_names()));
  app.add_option("--stage", stage, "Overrides the positional command")
      ->check(CLI::IsMember(blochhom::command_names()));
  app.add_option("--config", config_path, "Run configuration (JSON)")->required();
  app.add_option("--out", out_dir, "Output directory (defaults to output.dir of the config)");
  auto* seed_opt = app.add_option("--seed", seed, "Overrides numerics.seed");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_flag("--quiet", quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (!stage.empty()) command = stage;
  if (command.empty()) {
    std::cerr << "error: a command or --stage is required (" << names << ")\n";
    return 2;
  }

  try {
    const auto started = std::chrono::steady_clock::now();
    const std::string started_at = utc_now();
    blochhom::RunConfig cfg = blochhom::parse_config(read_file(config_path));
    blochhom::CliOptions opts;
    opts.threads = threads;
    opts.quiet = quiet;
    if (seed_opt->count() > 0) {
      opts.seed = seed;
      cfg.seed = seed;
    }
    opts.out_dir = out_dir.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out_dir);

    if (!quiet) std::cerr << fmt::format("[blochhom] {} on '{}' ({} threads)\n", command, cfg.scenario, threads);
    const auto out = blochhom::run_command(command, cfg, opts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    blochhom::write_report(out, cfg, opts.out_dir, started_at, wall);
    if (!quiet) {
      for (const auto& n : out.notices) std::cerr << "[blochhom] notice: " << n << "\n";
      std::cerr << fmt::format("[blochhom] wrote {} in {:.2f} s\n", opts.out_dir.string(), wall);
    }
    return 0;
  } catch (const blochhom::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const blochhom::HypothesisViolation& e) {
    std::cerr << "hypothesis violated: " << e.what() << "\n";
    return 3;
  } catch (const blochhom::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
