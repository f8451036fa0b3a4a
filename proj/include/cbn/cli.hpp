#ifndef CBN_CLI_HPP
#define CBN_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace cbn::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,     // unexpected internal error
    kUsage = 2,       // bad or missing flags
    kIo = 3,          // unreadable input, unwritable output
    kValidation = 4,  // malformed or inconsistent input
    kNumeric = 5,     // zero-probability evidence and other numeric failures
};

/// Runs one command line (without the program name). Diagnostics go to `err`
/// as "cbn: <kind>: <message>"; progress lines go to `err` prefixed "cbn: ".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbn::cli

#endif  // CBN_CLI_HPP
