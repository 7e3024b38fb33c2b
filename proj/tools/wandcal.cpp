#include "wandcal/cli.hpp"

int main(int argc, char** argv) { return wandcal::cli::run(argc, argv); }
