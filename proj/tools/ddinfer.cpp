#include "ddinfer/cli.hpp"

int main(int argc, char** argv) { return ddinfer::cli::run(argc, argv); }
