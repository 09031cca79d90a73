#include "hbvar/cli.hpp"

int main(int argc, char** argv) { return hbvar::cli::run(argc, argv); }
