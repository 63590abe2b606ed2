#include "pointseg/cli.hpp"

int main(int argc, char** argv) { return pointseg::cli::run_cli(argc, argv); }
