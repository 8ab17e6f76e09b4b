#include "aunet/cli.hpp"

int main(int argc, char** argv) { return aunet::run_cli(argc, argv); }
