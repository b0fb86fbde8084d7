#include "bharnet/cli.hpp"

int main(int argc, char** argv) { return bharnet::cli::run(argc, argv); }
