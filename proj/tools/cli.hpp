#pragma once

namespace vg::cli {

// Exit 0 on success, 1 on a module error, 2 on a usage error.
int run(int argc, char** argv);

}  // namespace vg::cli
