#include "cli.hpp"

int main(int argc, char** argv) { return vg::cli::run(argc, argv); }
