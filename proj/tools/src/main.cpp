#include "spinmetro/cli.hpp"

int main(int argc, char** argv) { return spinmetro::cli::main_entry(argc, argv); }
