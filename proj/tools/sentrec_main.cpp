#include "sentrec/cli.hpp"

int main(int argc, char** argv) { return sentrec::cli::run(argc, argv); }
