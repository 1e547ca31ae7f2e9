#include "injectlab/cli.hpp"

int main(int argc, char** argv) { return injectlab::cli::main(argc, argv); }
