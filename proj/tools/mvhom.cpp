#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mvhom/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mvhom: homogenization of manifold-valued linear-growth energies"};
  app.set_version_flag("--version", std::string("mvhom ") + mvhom::kVersion);
  app.require_subcommand(1, 1);

  mvhom::RunRequest request;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 1;
  const char* commands[][2] = {
      {"tfhom", "tangentially homogenized bulk density along the doubling schedule"},
      {"theta", "homogenized surface density from jump cells"},
      {"fhom-eval", "evaluate F_hom on a recipe-built BV map"},
      {"gamma-sweep", "minimize F_eps along an eps schedule"},
      {"certify", "sample the structural hypotheses of the integrand"},
      {"probes", "rank-one, basis-independence and regularity probes"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", request.config, "experiment config file")->required();
    sub->add_option("--out", out, "output directory (default: output.dir, else .)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "worker threads (MVHOM_THREADS overrides)")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mvhom::kExitError;
  }
  const CLI::App* sub = app.get_subcommands().front();
  request.command = sub->get_name();
  request.out_dir = out;
  if (sub->count("--seed")) request.seed = seed;
  request.threads = mvhom::resolve_threads(threads, std::getenv("MVHOM_THREADS"));
  return mvhom::run(request, std::cerr);
}
