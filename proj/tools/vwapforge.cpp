#include "vwapforge/cli/commands.hpp"

int main(int argc, char** argv) { return vwapforge::cli::run(argc, argv); }
