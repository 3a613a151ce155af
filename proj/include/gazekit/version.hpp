#pragma once

#define GAZEKIT_VERSION "0.1.0"

namespace gazekit {

inline const char* version() { return GAZEKIT_VERSION; }

}  // namespace gazekit
