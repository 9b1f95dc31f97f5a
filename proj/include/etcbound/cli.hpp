#pragma once

namespace etcbound::cli {

// Exit codes: 0 success, 2 usage error, 3 data or contract error.
int run(int argc, char** argv);

}  // namespace etcbound::cli
