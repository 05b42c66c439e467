#include "offpath/attack/observation.hpp"

namespace offpath::attack {

void IpidObservation::annotate() {
  gaps.clear();
  missing.clear();
  std::optional<std::uint16_t> prev;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.ipid) {
      missing.push_back(i);
      prev.reset();
      continue;
    }
    if (prev && ipid_delta(*prev, *s.ipid) >= 2) gaps.push_back(i);
    prev = s.ipid;
  }
}

std::uint64_t IpidObservation::extra_increments() const {
  std::uint64_t total = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!samples[i].ipid || !samples[i - 1].ipid) continue;
    auto d = ipid_delta(*samples[i - 1].ipid, *samples[i].ipid);
    if (d >= 1) total += d - 1u;
  }
  return total;
}

}  // namespace offpath::attack
