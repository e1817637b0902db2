#pragma once

namespace sentrec::cli {

// Entry point behind tools/sentrec_main.cpp. Parses flags, loads the config
// file, dispatches the command, and maps failures to exit codes:
//   0 success
//   1 runtime error (bad data, remote failure, ...)
//   2 unknown command
//   3 invalid configuration (bad flag/key, conflicting options)
//   4 missing or unreadable files
int run(int argc, char** argv);

}  // namespace sentrec::cli
