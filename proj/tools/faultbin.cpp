#include "faultbin/cli.hpp"

int main(int argc, char** argv) { return faultbin::cli_main(argc, argv); }
