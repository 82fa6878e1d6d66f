#include "noisebench/cli.hpp"

int main(int argc, char** argv) { return noisebench::cli_main(argc, argv); }
