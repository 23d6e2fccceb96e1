#include "cli.hpp"

int main(int argc, char** argv) { return sheetcap::cli::run(argc, argv); }
