#include "cli_app.hpp"

int main(int argc, char** argv) { return hadlrr::cli::run(argc, argv); }
