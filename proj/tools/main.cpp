#include "evogec/cli.hpp"

int main(int argc, char** argv) { return evogec::run_cli(argc, argv); }
