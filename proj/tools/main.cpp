#include "cli.hpp"

int main(int argc, char** argv) { return scproj::cli_main(argc, argv); }
