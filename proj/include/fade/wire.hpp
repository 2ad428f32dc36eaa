#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fade {

/// EtherType carried by every frame of the protocol.
inline constexpr std::uint16_t kEtherType = 0xFADE;

/// Packets per data set; also the number of sender packet buffers.
inline constexpr std::size_t kPacketsPerSet = 32;
inline constexpr std::size_t kPayloadBytes = 1024;
inline constexpr std::size_t kSetBytes = kPacketsPerSet * kPayloadBytes;

inline constexpr std::size_t kEthernetHeaderBytes = 14;
inline constexpr std::size_t kControlFrameBytes = 64;
inline constexpr std::size_t kDataFrameBytes = kEthernetHeaderBytes + 2 + 4 + 4 + kPayloadBytes;
inline constexpr std::size_t kEthernetMtuBytes = 1518;

static_assert(kDataFrameBytes == 1048);
static_assert(kDataFrameBytes < kEthernetMtuBytes);

enum class WireErrc {
    invalid_field,
    out_of_range,
    malformed,
    unknown_type,
};

class WireError : public std::runtime_error {
public:
    WireError(WireErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    WireErrc code() const noexcept { return code_; }

private:
    WireErrc code_;
};

struct MacAddr {
    std::array<std::uint8_t, 6> octets{};

    /// Parses "aa:bb:cc:dd:ee:ff" (also accepts '-' separators).
    static MacAddr parse(std::string_view text);
    std::string to_string() const;

    auto operator<=>(const MacAddr&) const = default;
};

/// Sequence label of a Data/Ack frame: 16-bit set, 10-bit retry, 6-bit packet.
struct SeqNum {
    std::uint16_t set = 0;
    std::uint16_t retry = 0;
    std::uint8_t pkt = 0;

    bool operator==(const SeqNum&) const = default;
};

/// Packs as [31:16]=set, [15:6]=retry, [5:0]=pkt. Throws invalid_field when
/// retry or pkt do not fit their bit fields.
std::uint32_t pack_seq(const SeqNum& seq);

/// Inverse of pack_seq. Throws out_of_range when the packet field addresses
/// a buffer beyond the 32 the protocol uses.
SeqNum unpack_seq(std::uint32_t word);

enum class FrameKind : std::uint16_t {
    start = 0x0001,
    ack = 0x0003,
    stop = 0x0005,
    data = 0xA5A5,
};

std::string_view to_string(FrameKind kind);

struct Frame {
    MacAddr dst;
    MacAddr src;
    FrameKind kind = FrameKind::start;
    SeqNum seq;                          // Data and Ack only
    std::uint32_t delay_us = 0;          // Data only
    std::vector<std::uint8_t> payload;   // Data only, exactly kPayloadBytes

    bool operator==(const Frame&) const = default;

    /// Number of bytes this frame occupies on the wire (FCS excluded).
    std::size_t wire_size() const noexcept {
        return kind == FrameKind::data ? kDataFrameBytes : kControlFrameBytes;
    }
};

Frame make_start(const MacAddr& dst, const MacAddr& src);
Frame make_stop(const MacAddr& dst, const MacAddr& src);
Frame make_ack(const MacAddr& dst, const MacAddr& src, const SeqNum& seq);
Frame make_data(const MacAddr& dst, const MacAddr& src, const SeqNum& seq, std::uint32_t delay_us,
                std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode(const Frame& frame);

/// Decodes one frame. Returns nullopt for frames of another EtherType;
/// throws WireError for truncated or malformed frames of this protocol.
std::optional<Frame> decode(std::span<const std::uint8_t> bytes);

/// Signed representative of (to - from) mod 2^16, in [-32768, 32767].
constexpr int set_distance(std::uint16_t from_set, std::uint16_t to_set) noexcept {
    return static_cast<int>(static_cast<std::int16_t>(static_cast<std::uint16_t>(to_set - from_set)));
}

}  // namespace fade
