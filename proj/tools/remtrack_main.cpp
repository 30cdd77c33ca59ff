#include "remtrack/cli.hpp"

int main(int argc, char** argv) { return remtrack::cli::run(argc, argv); }
