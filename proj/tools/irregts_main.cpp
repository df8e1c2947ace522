#include "irregts/cli.hpp"

int main(int argc, char** argv) { return irregts::cli::run_command(argc, argv); }
