#include "qestack/cli.hpp"

int main(int argc, char** argv) { return qestack::cli::run(argc, argv); }
