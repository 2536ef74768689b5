#include "cli.hpp"

int main(int argc, char** argv) { return qfedtd::cli_main(argc, argv); }
