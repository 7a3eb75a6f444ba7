#include "specdet/cli.hpp"

int main(int argc, char** argv) { return specdet::cli::run(argc, argv); }
