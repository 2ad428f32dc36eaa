#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fade/wire.hpp"

namespace fade {

enum class ReceiverErrc {
    capacity,         // slot table full
    already_started,  // STARTMAC on a started device
    not_found,        // unknown MAC
    range,            // WRITEPTRS beyond available data
    invalid_argument,
};

class ReceiverError : public std::runtime_error {
public:
    ReceiverError(ReceiverErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ReceiverErrc code() const noexcept { return code_; }

private:
    ReceiverErrc code_;
};

enum class RxKind { none, send_ack, send_stop };

struct RxAction {
    RxKind kind = RxKind::none;
    SeqNum seq;       // send_ack
    MacAddr target;   // destination of the ACK or STOP
    bool stored = false;

    bool operator==(const RxAction&) const = default;
};

/// Pointer snapshot returned by read_ptrs. head and tail are ring offsets;
/// available is the number of bytes the consumer may process.
struct RingPointers {
    std::size_t head = 0;
    std::size_t tail = 0;
    std::size_t available = 0;

    bool operator==(const RingPointers&) const = default;
};

/// Host-side protocol handler with one circular buffer per front-end board.
///
/// handle_frame and the consumer calls (read_ptrs, write_ptrs, poll_ready,
/// ring) may run on different threads; each slot serializes its own state.
/// Bytes between tail and head never change until the consumer releases
/// them with write_ptrs, so they can be read through ring() without locking.
class ReceiverCore {
public:
    static constexpr std::size_t kDefaultRingSets = 4;

    ReceiverCore(const MacAddr& host_mac, std::size_t max_slaves);
    ~ReceiverCore();

    ReceiverCore(const ReceiverCore&) = delete;
    ReceiverCore& operator=(const ReceiverCore&) = delete;

    /// Registers (or restarts) the board and returns the START frame to send.
    /// The ring holds ring_sets whole data sets; ring_sets >= 2.
    Frame start_feb(const MacAddr& mac, std::size_t ring_sets = kDefaultRingSets);

    /// Marks the board stopped, keeping its ring for draining.
    Frame stop_feb(const MacAddr& mac);

    RxAction handle_frame(const Frame& frame);

    RingPointers read_ptrs(const MacAddr& mac) const;
    void write_ptrs(const MacAddr& mac, std::size_t consumed);
    bool poll_ready(const MacAddr& mac) const;
    void set_wakeup(const MacAddr& mac, std::size_t threshold);
    std::size_t get_buf_len(const MacAddr& mac) const;

    /// Read-only view of the whole ring, the analogue of the mmap'ed buffer.
    std::span<const std::uint8_t> ring(const MacAddr& mac) const;

    /// Copies the available bytes (handling wraparound) and releases them.
    std::vector<std::uint8_t> consume(const MacAddr& mac, std::size_t max_bytes = SIZE_MAX);

    const MacAddr& host_mac() const noexcept { return host_mac_; }
    std::size_t max_slaves() const noexcept { return max_slaves_; }
    std::size_t slot_count() const;

    /// Counters and pointers by name. Per-board entries are prefixed with
    /// "feb.<mac>.".
    std::map<std::string, std::int64_t> metrics() const;

private:
    struct Slot;

    Slot& find(const MacAddr& mac) const;

    MacAddr host_mac_;
    std::size_t max_slaves_;
    mutable std::mutex table_mu_;
    std::map<MacAddr, std::unique_ptr<Slot>> slots_;

    mutable std::mutex counters_mu_;
    std::int64_t unregistered_source_ = 0;
    std::int64_t unexpected_kind_ = 0;
};

}  // namespace fade
