#pragma once

#include <ostream>
#include <string_view>

#include "offpath/net/time.hpp"

namespace offpath::net {

enum class TraceDir { Tx, Rx, Lost, Filtered, NoRoute, Note };

std::string_view to_string(TraceDir dir);

// One line per event: `time_ms host direction detail`.
class Trace {
 public:
  void attach(std::ostream* out) { out_ = out; }
  bool enabled() const { return out_ != nullptr; }

  void record(SimTime t, std::string_view host, TraceDir dir, std::string_view detail);

 private:
  std::ostream* out_ = nullptr;
};

}  // namespace offpath::net
