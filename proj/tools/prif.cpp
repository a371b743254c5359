#include "prif/cli.hpp"

int main(int argc, char** argv) { return prif::cli::run(argc, argv); }
