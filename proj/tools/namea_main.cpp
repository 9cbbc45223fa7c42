#include "namea/cli/app.hpp"

int main(int argc, char** argv) { return namea::cli::run_main(argc, argv); }
