// isac: dual-engine evaluator for integrated sensing-and-communication
// network metrics. Subcommands: run, validate, reproduce, specfun-selftest.

#include <iostream>
#include <string>
#include <vector>

#include "isac/config.hpp"
#include "isac/runner.hpp"

namespace {

void print_usage(std::ostream& os) {
  os << "usage:\n"
        "  isac run <config> [--timings] [--out <path>]\n"
        "      Evaluate the configured metrics (CSV to the config's output, '-' = stdout).\n"
        "  isac validate <config>\n"
        "      Run both engines on the configured grid and report per-metric agreement.\n"
        "  isac reproduce --preset <name> [--out <dir>] [--timings]\n"
        "      Run a named figure preset; writes <dir>/<name>.csv (default dir '.').\n"
        "  isac specfun-selftest\n"
        "      Check the special-function kernel against direct quadrature.\n"
        "\n"
        "presets:";
  for (const auto& [name, text] : isac::preset_table()) os << ' ' << name;
  os << "\n"
        "environment: ISAC_THREADS caps Monte Carlo worker threads (results are\n"
        "identical for any thread count).\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (args.empty()) {
      print_usage(std::cerr);
      return 2;
    }
    const std::string cmd = args[0];
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
      print_usage(std::cout);
      return 0;
    }

    if (cmd == "run" || cmd == "validate") {
      std::string config_path, out_override;
      bool timings = false;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--timings") timings = true;
        else if (args[i] == "--out") {
          if (++i >= args.size()) throw isac::ConfigError("--out requires a path argument");
          out_override = args[i];
        } else if (!args[i].empty() && args[i][0] == '-')
          throw isac::ConfigError("unknown option '" + args[i] + "' for " + cmd);
        else if (config_path.empty()) config_path = args[i];
        else throw isac::ConfigError("unexpected extra argument '" + args[i] + "'");
      }
      if (config_path.empty())
        throw isac::ConfigError(cmd + " requires a config file path (see isac --help)");
      if (cmd == "run") return isac::cmd_run(config_path, timings, out_override, std::cerr);
      return isac::cmd_validate(config_path, std::cout, std::cerr);
    }

    if (cmd == "reproduce") {
      std::string preset, out_dir;
      bool timings = false;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--preset" || args[i] == "--figure") {
          if (++i >= args.size())
            throw isac::ConfigError(args[i - 1] + " requires a preset name argument");
          preset = args[i];
        } else if (args[i] == "--out") {
          if (++i >= args.size()) throw isac::ConfigError("--out requires a directory argument");
          out_dir = args[i];
        } else if (args[i] == "--timings") timings = true;
        else throw isac::ConfigError("unknown option '" + args[i] + "' for reproduce");
      }
      if (preset.empty())
        throw isac::ConfigError("reproduce requires --preset <name> (or --figure <name>)");
      return isac::cmd_reproduce(preset, out_dir, timings, std::cerr);
    }

    if (cmd == "specfun-selftest") {
      if (args.size() > 1) throw isac::ConfigError("specfun-selftest takes no arguments");
      return isac::cmd_selftest(std::cout);
    }

    std::cerr << "error: unknown command '" << cmd << "'\n";
    print_usage(std::cerr);
    return 2;
  } catch (const isac::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
