#include "dlambda/scenario_runner.hpp"

int main(int argc, char** argv) { return dlambda::cli_main(argc, argv); }
