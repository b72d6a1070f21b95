#include "cli_app.hpp"

int main(int argc, char** argv) { return cmfda::cli::run(argc, argv); }
