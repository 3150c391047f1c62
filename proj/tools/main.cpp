#include "grcl/cli.hpp"

int main(int argc, char** argv) { return grcl::cli::run(argc, argv); }
