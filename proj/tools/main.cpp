#include "cli.hpp"

int main(int argc, char** argv) { return stvc::cli::run(argc, argv); }
