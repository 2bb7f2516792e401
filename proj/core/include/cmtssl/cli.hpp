#pragma once

namespace cmtssl {

// Entry point behind the `cmtssl` binary. Returns the process exit status:
// 0 success, 1 pipeline failure, 2 usage error.
int run_command(int argc, const char* const* argv);

}  // namespace cmtssl
