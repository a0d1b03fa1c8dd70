#ifndef SCPROJ_CLI_HPP
#define SCPROJ_CLI_HPP

namespace scproj {

/**
 * Entry point behind the `scproj` binary, separated out so tests can invoke
 * commands in-process. Returns the process exit code: 0 on success, 2 on a
 * usage error, 1 on a runtime failure.
 */
int cli_main(int argc, const char* const* argv);

}  // namespace scproj

#endif
