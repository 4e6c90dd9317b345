#pragma once

#include <cstdint>
#include <string_view>

namespace collidecomm {

enum class EventType : std::uint8_t {
    TFIRST,
    TCOMM,
    TCOMM1,
    TLISTEN,
    PROBE,
    BIT_SENT,
    BIT_DECODED,
    RECURSE,
    EXPLOIT,
    FAILURE,
};

std::string_view to_string(EventType type);

// A protocol event emitted by one player at the end of a round. `value`
// carries the event's payload: the cycle index for timing events, the bit
// for BIT_SENT/BIT_DECODED/PROBE, the new arm count for RECURSE.
struct ProtocolEvent {
    std::uint64_t round = 0;
    int player = 0;
    EventType type = EventType::TFIRST;
    std::int64_t value = 0;
};

// How a round is accounted in the regret decomposition.
enum class PhaseTag : std::uint8_t { round_robin = 0, collision = 1, exploit = 2 };

std::string_view to_string(PhaseTag tag);

}  // namespace collidecomm
