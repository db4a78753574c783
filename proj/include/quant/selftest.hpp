#pragma once
#include <ostream>

namespace quant::selftest {

// Embedded oracle suite (OLS closed form, drawdown brute force, gradient
// checks, accounting replay). Prints one line per check with the tolerance
// used; returns true when every check passes.
bool run(std::ostream& os);

}  // namespace quant::selftest
