#include "etcbound/cli.hpp"

int main(int argc, char** argv) { return etcbound::cli::run(argc, argv); }
