#pragma once

#include <ostream>

namespace hyper {

// Exit codes: 0 ok, 1 run failure (diagnostic on `err`), 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyper
