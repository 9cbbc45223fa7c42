#pragma once

namespace namea::cli {

/// Entry point of the `namea` command-line tool. Returns the exit status.
int run_main(int argc, char** argv);

}  // namespace namea::cli
