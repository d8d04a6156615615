// Writes the calibration corpus used by the bench tests as JSONL on stdout.
//   calibration_corpus [docs-per-collection]

#include "support.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
    testsupport::calibration_world(n).corpus.write(std::cout);
}
