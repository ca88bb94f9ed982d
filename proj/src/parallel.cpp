#include "slsg/parallel.hpp"

#include <cstdlib>
#include <string>

namespace slsg {

int default_workers() {
  const char* env = std::getenv("SLSG_WORKERS");
  if (!env || !*env) return 1;
  try {
    const int n = std::stoi(env);
    return n > 0 ? n : 1;
  } catch (...) {
    return 1;
  }
}

}  // namespace slsg
