#include "cli.hpp"

int main(int argc, char** argv) { return stgan::cli::run(argc, argv); }
