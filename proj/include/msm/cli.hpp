#pragma once

#include <iosfwd>

namespace msm {

// Exit codes: 0 ok, 1 usage error, 2 data validation error, 3 fit failure.
// Errors are also written to `err` as a one-line JSON record.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msm
