#pragma once

namespace lcmem {

// Full command-line dispatch; linked into the lcmem binary and callable from
// tests. Returns the process exit code: 0 success, 1 validation/runtime
// failure, 2 configuration or file-format error.
int cli_main(int argc, const char* const* argv);

} // namespace lcmem
