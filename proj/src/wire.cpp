#include "fade/wire.hpp"

#include <algorithm>
#include <cstdio>

namespace fade {

namespace {

constexpr std::uint32_t kRetryLimit = 1u << 10;
constexpr std::uint32_t kPktFieldLimit = 1u << 6;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

MacAddr MacAddr::parse(std::string_view text) {
    MacAddr mac;
    if (text.size() != 17) throw WireError(WireErrc::invalid_field, "bad MAC address: " + std::string(text));
    for (std::size_t i = 0; i < 6; ++i) {
        const int hi = hex_value(text[i * 3]);
        const int lo = hex_value(text[i * 3 + 1]);
        if (hi < 0 || lo < 0 || (i < 5 && text[i * 3 + 2] != ':' && text[i * 3 + 2] != '-')) {
            throw WireError(WireErrc::invalid_field, "bad MAC address: " + std::string(text));
        }
        mac.octets[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return mac;
}

std::string MacAddr::to_string() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2], octets[3],
                  octets[4], octets[5]);
    return buf;
}

std::uint32_t pack_seq(const SeqNum& seq) {
    if (seq.pkt >= kPktFieldLimit || seq.retry >= kRetryLimit) {
        throw WireError(WireErrc::invalid_field, "sequence field does not fit its bit width");
    }
    return (std::uint32_t{seq.set} << 16) | (std::uint32_t{seq.retry} << 6) | std::uint32_t{seq.pkt};
}

SeqNum unpack_seq(std::uint32_t word) {
    SeqNum seq;
    seq.set = static_cast<std::uint16_t>(word >> 16);
    seq.retry = static_cast<std::uint16_t>((word >> 6) & (kRetryLimit - 1));
    seq.pkt = static_cast<std::uint8_t>(word & (kPktFieldLimit - 1));
    if (seq.pkt >= kPacketsPerSet) {
        throw WireError(WireErrc::out_of_range, "packet number " + std::to_string(seq.pkt) + " >= 32");
    }
    return seq;
}

std::string_view to_string(FrameKind kind) {
    switch (kind) {
        case FrameKind::start: return "START";
        case FrameKind::stop: return "STOP";
        case FrameKind::data: return "DATA";
        case FrameKind::ack: return "ACK";
    }
    return "?";
}

Frame make_start(const MacAddr& dst, const MacAddr& src) { return Frame{dst, src, FrameKind::start, {}, 0, {}}; }

Frame make_stop(const MacAddr& dst, const MacAddr& src) { return Frame{dst, src, FrameKind::stop, {}, 0, {}}; }

Frame make_ack(const MacAddr& dst, const MacAddr& src, const SeqNum& seq) {
    return Frame{dst, src, FrameKind::ack, seq, 0, {}};
}

Frame make_data(const MacAddr& dst, const MacAddr& src, const SeqNum& seq, std::uint32_t delay_us,
                std::span<const std::uint8_t> payload) {
    if (payload.size() != kPayloadBytes) {
        throw WireError(WireErrc::invalid_field, "data payload must be exactly 1024 bytes");
    }
    return Frame{dst, src, FrameKind::data, seq, delay_us, {payload.begin(), payload.end()}};
}

std::vector<std::uint8_t> encode(const Frame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(frame.wire_size());
    out.insert(out.end(), frame.dst.octets.begin(), frame.dst.octets.end());
    out.insert(out.end(), frame.src.octets.begin(), frame.src.octets.end());
    put_u16(out, kEtherType);
    put_u16(out, static_cast<std::uint16_t>(frame.kind));
    switch (frame.kind) {
        case FrameKind::data:
            if (frame.payload.size() != kPayloadBytes) {
                throw WireError(WireErrc::invalid_field, "data payload must be exactly 1024 bytes");
            }
            put_u32(out, pack_seq(frame.seq));
            put_u32(out, frame.delay_us);
            out.insert(out.end(), frame.payload.begin(), frame.payload.end());
            break;
        case FrameKind::ack:
            put_u32(out, pack_seq(frame.seq));
            [[fallthrough]];
        case FrameKind::start:
        case FrameKind::stop:
            out.resize(kControlFrameBytes, 0);
            break;
    }
    return out;
}

std::optional<Frame> decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kControlFrameBytes) {
        throw WireError(WireErrc::malformed, "frame shorter than 64 bytes");
    }
    if (get_u16(bytes, 12) != kEtherType) return std::nullopt;

    Frame f;
    std::copy_n(bytes.begin(), 6, f.dst.octets.begin());
    std::copy_n(bytes.begin() + 6, 6, f.src.octets.begin());
    const std::uint16_t type_word = get_u16(bytes, 14);
    switch (type_word) {
        case static_cast<std::uint16_t>(FrameKind::start):
        case static_cast<std::uint16_t>(FrameKind::stop):
        case static_cast<std::uint16_t>(FrameKind::ack):
            if (bytes.size() != kControlFrameBytes) {
                throw WireError(WireErrc::malformed, "control frame must be 64 bytes");
            }
            f.kind = static_cast<FrameKind>(type_word);
            if (f.kind == FrameKind::ack) f.seq = unpack_seq(get_u32(bytes, 16));
            return f;
        case static_cast<std::uint16_t>(FrameKind::data):
            if (bytes.size() != kDataFrameBytes) {
                throw WireError(WireErrc::malformed, "data frame must be 1048 bytes");
            }
            f.kind = FrameKind::data;
            f.seq = unpack_seq(get_u32(bytes, 16));
            f.delay_us = get_u32(bytes, 20);
            f.payload.assign(bytes.begin() + 24, bytes.end());
            return f;
        default: {
            char buf[8];
            std::snprintf(buf, sizeof buf, "0x%04x", type_word);
            throw WireError(WireErrc::unknown_type, std::string("unknown type word ") + buf);
        }
    }
}

}  // namespace fade
