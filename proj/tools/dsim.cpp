#include "cwdd/cli.hpp"

int main(int argc, char** argv) { return cwdd::run_command(argc, argv); }
