#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>

#include "fade/nca.hpp"
#include "fade/wire.hpp"

namespace fade {

/// Per-buffer state kept by the descriptor manager.
struct PacketDescriptor {
    bool valid = false;      // buffer completely filled
    bool sent = false;       // transmitted at least once
    bool confirmed = false;  // ACK received
    std::uint16_t set_number = 0;

    bool operator==(const PacketDescriptor&) const = default;
};

enum class Command { start, stop };

/// Which of the prioritized tasks a step() call performed.
enum class StepTask { idle, ack, head, transmit };

struct SendAction {
    StepTask task = StepTask::idle;
    std::optional<Frame> frame;  // present iff task == transmit
    Nanos not_before{0};
    bool resend = false;

    bool is_transmit() const noexcept { return frame.has_value(); }
};

/// Software model of the front-end board's transmit core: a ring of 32
/// packet buffers with one descriptor each, managed through head (buffer
/// being filled), tail (oldest unconfirmed) and retr (next to transmit).
///
/// Not thread-safe; callers serialize all access.
class SenderCore {
public:
    static constexpr std::size_t kAckQueueDepth = 64;
    static constexpr std::size_t kWordsPerBuffer = kPayloadBytes / 4;

    SenderCore(const MacAddr& mac, const MacAddr& host_mac, const NcaParams& params = NcaParams::set1());

    /// Writes one 32-bit input word (stored big-endian) into the buffer at
    /// head. Returns false, leaving state untouched, when the core is not
    /// ready to accept data.
    bool offer_word(std::uint32_t word);

    /// Bulk form of offer_word; returns the number of words accepted.
    std::size_t offer_words(std::span<const std::uint32_t> words);

    /// Runs at most one task, highest priority first: pending ACK, head
    /// advance, then (re)transmission of the buffer at retr. A transmission
    /// needs the transceiver to be ready and the inter-packet delay to have
    /// elapsed since the previous one.
    SendAction step(Nanos now, bool transmitter_ready = true);

    /// Applies an acknowledgment immediately. ACKs whose set number does not
    /// match the addressed descriptor are discarded without any effect.
    void on_ack(const SeqNum& seq);

    /// Queues an ACK for processing by step(); the queue holds 64 entries
    /// and drops the oldest on overflow.
    void enqueue_ack(const SeqNum& seq);

    /// START resets the whole core and enables it; STOP halts it.
    void on_command(Command cmd);

    void set_host_mac(const MacAddr& host) { host_mac_ = host; }

    bool running() const noexcept { return running_; }
    bool data_ready() const noexcept { return data_ready_; }
    std::size_t head() const noexcept { return head_; }
    std::size_t tail() const noexcept { return tail_; }
    std::size_t retr() const noexcept { return retr_; }
    std::size_t fill_offset() const noexcept { return fill_offset_; }
    std::uint16_t current_set() const noexcept { return current_set_; }
    const MacAddr& mac() const noexcept { return mac_; }
    const MacAddr& host_mac() const noexcept { return host_mac_; }
    const PacketDescriptor& descriptor(std::size_t i) const { return descriptors_.at(i); }
    std::span<const std::uint8_t> buffer(std::size_t i) const { return buffers_.at(i); }
    const NcaState& nca() const noexcept { return nca_; }
    const NcaParams& nca_params() const noexcept { return params_; }
    std::size_t pending_acks() const noexcept { return ack_fifo_.size(); }
    std::uint64_t acks_overflowed() const noexcept { return acks_overflowed_; }
    std::uint64_t transmissions() const noexcept { return transmissions_; }
    std::uint64_t retransmissions() const noexcept { return retransmissions_; }

    /// Number of descriptors that are valid but not yet confirmed.
    std::size_t outstanding() const noexcept;

    /// True when some buffer in [tail, head) is waiting for (re)transmission.
    bool has_transmittable() const noexcept;

    /// Earliest time the NCA delay permits the next transmission, if any
    /// buffer is waiting.
    std::optional<Nanos> next_transmit_time() const;

    /// One-line dump of pointers and flags, for debugging and test asserts.
    std::string trace_record() const;

    bool operator==(const SenderCore&) const = default;

private:
    static constexpr std::size_t next(std::size_t i) noexcept { return (i + 1) % kPacketsPerSet; }

    bool in_window(std::size_t i) const noexcept;
    bool eligible(std::size_t i) const noexcept;
    std::size_t seek_retr(std::size_t from) const noexcept;
    bool try_advance_head();
    SendAction transmit(Nanos now);

    MacAddr mac_;
    MacAddr host_mac_;
    NcaParams params_;
    NcaState nca_;
    std::array<std::array<std::uint8_t, kPayloadBytes>, kPacketsPerSet> buffers_{};
    std::array<PacketDescriptor, kPacketsPerSet> descriptors_{};
    std::size_t head_ = 0;
    std::size_t tail_ = 0;
    std::size_t retr_ = 0;
    std::size_t fill_offset_ = 0;
    std::uint16_t current_set_ = 0;
    bool running_ = false;
    bool data_ready_ = false;
    std::optional<Nanos> last_transmit_;
    std::deque<SeqNum> ack_fifo_;
    std::uint64_t acks_overflowed_ = 0;
    std::uint64_t transmissions_ = 0;
    std::uint64_t retransmissions_ = 0;
};

}  // namespace fade
