#include "sar/cli.hpp"

int main(int argc, char** argv) { return sar::cli::run(argc, argv); }
