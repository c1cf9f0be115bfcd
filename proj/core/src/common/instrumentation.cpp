#include "recore/common/instrumentation.hpp"

namespace recore::instrumentation {

Counters& counters() {
  static Counters c;
  return c;
}

}  // namespace recore::instrumentation
