#include "gtsynth/cli.hpp"

int main(int argc, char** argv) { return gtsynth::cli::main(argc, argv); }
