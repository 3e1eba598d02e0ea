#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sdopf/profiles.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a 24-slot scenario for the bundled 13-node feeder"};
  std::string out;
  std::uint64_t seed = 1;
  double sigma = 0.1;
  double scale = 1.0;

  app.add_option("--out", out, "Output path")->required();
  app.add_option("--seed", seed, "Load-noise seed")->capture_default_str();
  app.add_option("--sigma", sigma, "Relative load noise per slot")->capture_default_str();
  app.add_option("--scale", scale, "Uniform multiplier on every peak load")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  std::ofstream os(out, std::ios::binary);
  if (!os) {
    std::cerr << "cannot open '" << out << "' for writing\n";
    return 4;
  }
  os << sdopf::example_scenario_json(seed, sigma, scale);
  os.flush();
  return os.good() ? 0 : 4;
}
