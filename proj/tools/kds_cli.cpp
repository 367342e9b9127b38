#include "kds/cli.hpp"

int main(int argc, char** argv) { return kds::cli_main(argc, argv); }
