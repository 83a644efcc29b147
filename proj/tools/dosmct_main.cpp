#include "dosmct/cli.hpp"

int main(int argc, char** argv) { return dosmct::run_cli(argc, argv); }
