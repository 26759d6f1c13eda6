#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "readbench/config.hpp"

namespace readbench {

/// Compact configuration label, e.g. "A16B1T3" or "U64B1MFT2".
///
/// Grammar: interface letter P (pread), A (kernel aio) or U (ring); for the
/// async interfaces the queue size, "B" and the batch size; for the ring an
/// optional "M" (fixed buffers) and "F" (fixed files), emitted in that order
/// and accepted in either; finally "T" and the thread count when more than one
/// thread runs. Settings the letters cannot express travel in `note`:
/// "+poll" for polled preads and "+sqpoll" for a ring kernel poll thread.
struct Label {
  std::string text;
  std::string note;

  std::string display() const { return note.empty() ? text : text + note; }
  bool operator==(const Label&) const = default;
};

struct LabeledConfig {
  EngineConfig engine;
  std::uint32_t threads = 1;

  bool operator==(const LabeledConfig&) const = default;
};

/// `engine` must be valid for `threads`: SyncRead runs on one thread and a
/// multi-threaded pread is ThreadPoolSync.
Label encode_label(const EngineConfig& engine, std::uint32_t threads);

/// Throws LabelParseError with the offending position.
LabeledConfig parse_label(std::string_view text);
LabeledConfig parse_label(const Label& label);

}  // namespace readbench
