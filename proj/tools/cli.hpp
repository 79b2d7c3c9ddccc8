#pragma once

namespace stgan::cli {

// Entry point shared by the executable and the end-to-end tests.
// 0 on success, 1 on validation or runtime errors, 2 on usage errors.
int run(int argc, const char* const* argv);

}  // namespace stgan::cli
