#include "reid/cli.hpp"

int main(int argc, char** argv) { return reid::cli::run(argc, argv); }
