#include "vtt/cli.hpp"

int main(int argc, char** argv) { return vtt::cli::run(argc, argv); }
