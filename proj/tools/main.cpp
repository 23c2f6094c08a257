#include "cldflood/commands.hpp"

int main(int argc, char** argv) { return cldflood::commands::run_cli(argc, argv); }
