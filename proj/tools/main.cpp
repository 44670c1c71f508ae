#include "crest/cli.hpp"

int main(int argc, char** argv) { return crest::cli::run(argc, argv); }
