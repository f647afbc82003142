// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace csforge {

// fast invariant checks; one line per check, true when all pass
bool run_selftest(std::ostream& os);

}  // namespace csforge
