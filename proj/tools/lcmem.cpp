#include "lcmem/cli_app.hpp"

int main(int argc, char** argv) { return lcmem::cli_main(argc, argv); }
