#include "commands.hpp"

int main(int argc, char** argv) { return confgp::cli::run(argc, argv); }
