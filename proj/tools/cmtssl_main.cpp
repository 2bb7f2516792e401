#include "cmtssl/cli.hpp"

int main(int argc, char** argv) { return cmtssl::run_command(argc, argv); }
