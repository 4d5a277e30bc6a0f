// Writes a small synthetic dataset for the CLI smoke test.
#include <cstdlib>
#include <iostream>

#include "fixtures.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_fixture <dir> [n_images] [seed]\n";
    return 64;
  }
  nemo::testing::FixtureSpec fixture_spec;
  if (argc > 2) fixture_spec.n_images = std::strtoull(argv[2], nullptr, 10);
  if (argc > 3) fixture_spec.seed = std::strtoull(argv[3], nullptr, 10);
  const auto paths = nemo::testing::write_synthetic_fixture(argv[1], fixture_spec);
  std::cout << paths.annotations.string() << "\n" << paths.embeddings.string() << "\n";
  return 0;
}
