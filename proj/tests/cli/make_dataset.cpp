// Writes a synthetic dataset for CLI tests: make_dataset SETTING N SEED PATH
#include "sieveate/error.hpp"
#include "sieveate/io.hpp"
#include "sieveate/simulation.hpp"

#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: make_dataset SETTING N SEED PATH\n";
    return 1;
  }
  try {
    const auto g = sieveate::sim::generate_dataset(sieveate::sim::setting(argv[1]), std::stol(argv[2]),
                                                   std::stoull(argv[3]));
    std::ofstream out(argv[4], std::ios::binary);
    sieveate::io::write_csv(g.data, out);
    return out ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
