#include <iostream>

#include "stredalab/run.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void usage(std::ostream& out) {
  out << "usage: stredalab <verb> [args]\n"
         "  run <config>         single experiment -> report.json + run.log\n"
         "  sweep <config>       B-sweep -> sweep.csv + run.log\n"
         "  oracle [config]      matrix identities + momentum-space Chern fixtures\n"
         "  cache-clear <dir>    remove cached eigensolves under <dir>/cache\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(std::cerr);
    return kExitValidation;
  }
  const std::string verb = argv[1];
  try {
    if (verb == "run" || verb == "sweep") {
      if (argc != 3) {
        std::cerr << "error: " << verb << " requires a config file argument\n";
        return kExitValidation;
      }
      const stredalab::RunConfig cfg = stredalab::parse_config(argv[2]);
      if (verb == "run")
        stredalab::run_single(cfg);
      else
        stredalab::run_sweep(cfg);
      return kExitOk;
    }
    if (verb == "oracle") {
      const bool ok = stredalab::run_oracle(std::cout);
      if (argc == 3) {  // optional config: also persist the lines next to the run outputs
        const stredalab::RunConfig cfg = stredalab::parse_config(argv[2]);
        std::ofstream log(std::filesystem::path(cfg.output_dir) / "oracle.log", std::ios::trunc);
        stredalab::run_oracle(log);
      }
      return ok ? kExitOk : kExitNumerical;
    }
    if (verb == "cache-clear") {
      if (argc != 3) {
        std::cerr << "error: cache-clear requires a directory argument\n";
        return kExitValidation;
      }
      const int n = stredalab::cache_clear(argv[2]);
      std::cout << "removed " << n << " cached eigensolves\n";
      return kExitOk;
    }
    std::cerr << "error: unknown verb '" << verb << "'\n";
    usage(std::cerr);
    return kExitValidation;
  } catch (const stredalab::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
