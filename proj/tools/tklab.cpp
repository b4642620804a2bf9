#include "tklab/cli.hpp"

int main(int argc, char** argv) { return tklab::cli::run(argc, argv); }
