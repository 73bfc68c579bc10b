#define DOCTEST_CONFIG_IMPLEMENT
#include <Eigen/Core>

#include "doctest.h"

int main(int argc, char** argv) {
  // Single-threaded products keep determinism checks bit-exact.
  Eigen::setNbThreads(1);
  return doctest::Context(argc, argv).run();
}
