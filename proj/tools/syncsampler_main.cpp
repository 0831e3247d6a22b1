#include "syncsampler/cli.hpp"

int main(int argc, char** argv) { return syncsampler::cli_main(argc, argv); }
