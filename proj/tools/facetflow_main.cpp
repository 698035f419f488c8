#include "facetflow/cli.hpp"

int main(int argc, char** argv) { return facetflow::run_command(argc, argv); }
