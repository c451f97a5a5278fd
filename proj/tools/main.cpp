#include "thb/cli.hpp"

int main(int argc, char** argv) { return thb::cli_main(argc, argv); }
