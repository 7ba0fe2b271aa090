#include "vftrack/cli.hpp"

int main(int argc, char** argv) { return vftrack::cli::run(argc, argv); }
