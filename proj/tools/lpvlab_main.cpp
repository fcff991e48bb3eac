#include "lpvlab/cli.hpp"

int main(int argc, char** argv) { return lpvlab::cli::run_cli(argc, argv); }
