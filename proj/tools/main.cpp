#include "cli.hpp"

int main(int argc, char** argv) { return denoise::cli::run(argc, argv); }
