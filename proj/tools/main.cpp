#include "cli.hpp"

int main(int argc, char** argv) { return ahocda::cli::main(argc, argv); }
