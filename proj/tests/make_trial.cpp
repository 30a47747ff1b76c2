// Writes a simulated trial CSV to stdout.
// Usage: make_trial N T lag tau seed

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include "swmcrt/io.hpp"
#include "swmcrt/sim.hpp"

int main(int argc, char** argv) {
  if (argc != 6) {
    std::cerr << "usage: make_trial N T lag tau seed\n";
    return 1;
  }
  try {
    const swmcrt::Sim1Config c{std::stoi(argv[1]), std::stoi(argv[2]), std::stoi(argv[3]), std::stod(argv[4])};
    swmcrt::SplitMix64 gen(std::stoull(argv[5]));
    swmcrt::write_trial_csv(std::cout, swmcrt::gen_outcomes_sim1(c, gen));
  } catch (const std::exception& e) {
    std::cerr << "make_trial: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
