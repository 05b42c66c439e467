#include "offpath/net/trace.hpp"

#include <fmt/format.h>

namespace offpath::net {

std::string_view to_string(TraceDir dir) {
  switch (dir) {
    case TraceDir::Tx: return "tx";
    case TraceDir::Rx: return "rx";
    case TraceDir::Lost: return "lost";
    case TraceDir::Filtered: return "filtered";
    case TraceDir::NoRoute: return "noroute";
    case TraceDir::Note: return "note";
  }
  return "?";
}

void Trace::record(SimTime t, std::string_view host, TraceDir dir, std::string_view detail) {
  if (!out_) return;
  *out_ << fmt::format("{} {} {} {}\n", t, host, to_string(dir), detail);
}

}  // namespace offpath::net
