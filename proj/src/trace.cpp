#include "ntx/trace.hpp"

#include <sstream>

namespace ntx {

std::string Trace::text() const {
  std::ostringstream os;
  dump(os);
  return os.str();
}

}  // namespace ntx
