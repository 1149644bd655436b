#ifndef REMARK_TOOLS_CLI_H_
#define REMARK_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace remark::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kUsage = 2,
  kIncompatible = 3,
};

// Runs one invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Git blob hash: sha1("blob <size>\0" + contents), lowercase hex.
std::string git_blob_sha1(std::string_view contents);

}  // namespace remark::cli

#endif  // REMARK_TOOLS_CLI_H_
