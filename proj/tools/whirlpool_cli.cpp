#include "whirlpool/cli.hpp"

int main(int argc, char** argv) { return whirlpool::cli_main(argc, argv); }
