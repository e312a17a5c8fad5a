#include "freeflow/version.hpp"

#ifndef FREEFLOW_VERSION
#define FREEFLOW_VERSION "unknown"
#endif

namespace freeflow {

const char* version() noexcept { return FREEFLOW_VERSION; }

}  // namespace freeflow
