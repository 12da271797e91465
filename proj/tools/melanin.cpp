#include "melanin/cli.hpp"

int main(int argc, char** argv) { return melanin::cli::run(argc, argv); }
