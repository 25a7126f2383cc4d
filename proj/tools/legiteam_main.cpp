#include "legiteam/cli.hpp"

int main(int argc, char** argv) { return legiteam::run_cli(argc, argv); }
