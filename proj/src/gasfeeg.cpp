// Compiles the umbrella header on its own so a missing include or an ODR
// problem in the header-only library fails the build rather than a consumer.
#include "gasfeeg/gasfeeg.hpp"
#include "gasfeeg/nn/gradcheck.hpp"
