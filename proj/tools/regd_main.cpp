#include "regd/cli.hpp"

int main(int argc, char** argv) { return regd::cli_main(argc, argv); }
