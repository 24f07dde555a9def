#include "swarmlab/cli.hpp"

int main(int argc, char** argv) { return swarmlab::cli::run(argc, argv); }
