#include "pepspec/cli.hpp"

int main(int argc, char** argv) { return pepspec::run_cli(argc, argv); }
