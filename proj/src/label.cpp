#include "readbench/label.hpp"

#include "readbench/errors.hpp"

namespace readbench {

namespace {

constexpr std::string_view kPollNote = "+poll";
constexpr std::string_view kSqPollNote = "+sqpoll";

}  // namespace

Label encode_label(const EngineConfig& engine, std::uint32_t threads) {
  Label label;
  switch (engine.kind) {
    case EngineKind::SyncRead:
    case EngineKind::ThreadPoolSync:
      label.text = "P";
      break;
    case EngineKind::PolledRead:
      label.text = "P";
      label.note = kPollNote;
      break;
    case EngineKind::KernelAsyncQueue:
      label.text = "A" + std::to_string(engine.queue_size) + "B" + std::to_string(engine.batch_size);
      break;
    case EngineKind::CompletionRing:
      label.text = "U" + std::to_string(engine.queue_size) + "B" + std::to_string(engine.batch_size);
      if (engine.fixed_buffers) label.text += "M";
      if (engine.fixed_files) label.text += "F";
      if (engine.kernel_poll) label.note = kSqPollNote;
      break;
  }
  if (threads > 1) label.text += "T" + std::to_string(threads);
  return label;
}

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool done() const { return pos_ >= s_.size(); }
  std::size_t pos() const { return pos_; }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  char take() { return s_[pos_++]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw LabelParseError(std::string(s_), pos_, what);
  }

  std::uint32_t number(const char* what) {
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (!done() && peek() >= '0' && peek() <= '9') {
      v = v * 10 + static_cast<unsigned>(take() - '0');
      if (v > 0xffffffffULL) {
        pos_ = start;
        fail(std::string(what) + " out of range");
      }
    }
    if (pos_ == start) fail(std::string("expected ") + what);
    if (s_[start] == '0') {
      pos_ = start;
      fail(std::string(what) + " must be a positive number without leading zeros");
    }
    return static_cast<std::uint32_t>(v);
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

LabeledConfig parse_label(std::string_view text) {
  Cursor c(text);
  LabeledConfig out;
  if (c.done()) c.fail("empty label");
  const char letter = c.take();
  switch (letter) {
    case 'P':
      out.engine.kind = EngineKind::SyncRead;
      break;
    case 'A':
      out.engine.kind = EngineKind::KernelAsyncQueue;
      break;
    case 'U':
      out.engine.kind = EngineKind::CompletionRing;
      break;
    default: {
      Cursor at_start(text);
      at_start.fail("interface letter must be P, A or U");
    }
  }

  if (letter != 'P') {
    const std::size_t queue_pos = c.pos();
    out.engine.queue_size = c.number("queue size");
    if (out.engine.queue_size > kMaxQueueSize) {
      Cursor at(text);
      while (at.pos() < queue_pos) at.take();
      at.fail("queue size above " + std::to_string(kMaxQueueSize));
    }
    if (c.peek() != 'B') c.fail("expected 'B' and batch size");
    c.take();
    const std::size_t batch_pos = c.pos();
    out.engine.batch_size = c.number("batch size");
    if (out.engine.batch_size > out.engine.queue_size) {
      Cursor at(text);
      while (at.pos() < batch_pos) at.take();
      at.fail("batch size exceeds queue size");
    }
  }

  while (c.peek() == 'M' || c.peek() == 'F') {
    if (letter != 'U') c.fail("fixed files and buffers apply only to the ring interface");
    bool& flag = c.peek() == 'M' ? out.engine.fixed_buffers : out.engine.fixed_files;
    if (flag) c.fail("repeated flag");
    flag = true;
    c.take();
  }

  if (c.peek() == 'T') {
    c.take();
    out.threads = c.number("thread count");
  }
  if (!c.done()) c.fail("unexpected character");

  if (letter == 'P' && out.threads > 1) out.engine.kind = EngineKind::ThreadPoolSync;
  return out;
}

LabeledConfig parse_label(const Label& label) {
  auto out = parse_label(label.text);
  if (label.note.empty()) return out;
  if (label.note == kPollNote && out.engine.kind == EngineKind::SyncRead) {
    out.engine.kind = EngineKind::PolledRead;
  } else if (label.note == kSqPollNote && out.engine.kind == EngineKind::CompletionRing) {
    out.engine.kernel_poll = true;
  } else {
    throw LabelParseError(label.display(), label.text.size(), "note does not apply to this label");
  }
  return out;
}

}  // namespace readbench
