#include "quant/cli.hpp"

int main(int argc, char** argv) { return quant::cli::run_cli(argc, argv); }
