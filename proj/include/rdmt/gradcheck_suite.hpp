#pragma once

#include <iosfwd>

namespace rdmt {

// Central-difference verification of every tape primitive (10 random
// instances each), the LSTM cell, and the full BCE-of-forward on a toy
// model (2 features, 2 windows, d=4, H=8). Prints one line per check;
// returns true iff everything passes.
bool run_gradcheck_suite(std::ostream& out);

}  // namespace rdmt
