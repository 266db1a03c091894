#include "dtet/cli.hpp"

int main(int argc, char** argv) { return dtet::run_cli(argc, argv); }
