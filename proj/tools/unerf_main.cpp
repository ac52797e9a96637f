#include "unerf/cli.hpp"

int main(int argc, char** argv) { return unerf::cli_dispatch(argc, argv); }
