#include "fade/receiver.hpp"

#include <algorithm>
#include <cstring>

namespace fade {

struct ReceiverCore::Slot {
    MacAddr mac;
    bool started = false;
    std::size_t ring_sets = kDefaultRingSets;
    std::vector<std::uint8_t> ring;

    // Oldest incompletely received set, as on the wire and as a running
    // count of sets completed since START.
    std::uint16_t expected_set = 0;
    std::uint64_t completed_sets = 0;
    std::array<std::uint32_t, 2> bitmaps{};
    std::array<std::size_t, 2> set_base{};

    // Absolute stream offsets; ring offsets are these modulo capacity.
    std::uint64_t head = 0;
    std::uint64_t tail = 0;
    std::size_t wakeup_threshold = 0;

    std::int64_t stored = 0;
    std::int64_t duplicates = 0;
    std::int64_t late_acks = 0;
    std::int64_t dropped_no_space = 0;
    std::int64_t bad_pkt_index = 0;
    std::int64_t bad_payload = 0;
    std::int64_t stale_set = 0;
    std::int64_t future_set = 0;

    mutable std::mutex mu;

    std::size_t capacity() const { return ring.size(); }

    void reset(std::size_t sets) {
        started = true;
        ring_sets = sets;
        ring.assign(sets * kSetBytes, 0);
        expected_set = 0;
        completed_sets = 0;
        bitmaps = {0, 0};
        set_base = {0, kSetBytes % capacity()};
        head = tail = 0;
    }

    void advance_head() {
        for (;;) {
            const std::uint64_t base = completed_sets * kSetBytes;
            std::size_t i = static_cast<std::size_t>((head - base) / kPayloadBytes);
            while (i < kPacketsPerSet && (bitmaps[0] >> i & 1u)) {
                head += kPayloadBytes;
                ++i;
            }
            if (bitmaps[0] != 0xFFFFFFFFu) return;
            ++completed_sets;
            ++expected_set;
            bitmaps = {bitmaps[1], 0};
            set_base = {set_base[1], (set_base[1] + kSetBytes) % capacity()};
        }
    }
};

ReceiverCore::ReceiverCore(const MacAddr& host_mac, std::size_t max_slaves)
    : host_mac_(host_mac), max_slaves_(max_slaves) {}

ReceiverCore::~ReceiverCore() = default;

ReceiverCore::Slot& ReceiverCore::find(const MacAddr& mac) const {
    std::lock_guard lock(table_mu_);
    auto it = slots_.find(mac);
    if (it == slots_.end()) throw ReceiverError(ReceiverErrc::not_found, "no slot for " + mac.to_string());
    return *it->second;
}

Frame ReceiverCore::start_feb(const MacAddr& mac, std::size_t ring_sets) {
    if (ring_sets < 2) throw ReceiverError(ReceiverErrc::invalid_argument, "ring must hold at least two data sets");
    std::lock_guard lock(table_mu_);
    auto it = slots_.find(mac);
    if (it == slots_.end()) {
        if (slots_.size() >= max_slaves_) {
            throw ReceiverError(ReceiverErrc::capacity, "all " + std::to_string(max_slaves_) + " slots in use");
        }
        it = slots_.emplace(mac, std::make_unique<Slot>()).first;
        it->second->mac = mac;
    } else if (it->second->started) {
        throw ReceiverError(ReceiverErrc::already_started, mac.to_string() + " already started");
    }
    Slot& slot = *it->second;
    std::lock_guard slot_lock(slot.mu);
    slot.reset(ring_sets);
    return make_start(mac, host_mac_);
}

Frame ReceiverCore::stop_feb(const MacAddr& mac) {
    Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    slot.started = false;
    return make_stop(mac, host_mac_);
}

RxAction ReceiverCore::handle_frame(const Frame& frame) {
    if (frame.kind != FrameKind::data) {
        std::lock_guard lock(counters_mu_);
        ++unexpected_kind_;
        return {};
    }

    Slot* slot = nullptr;
    {
        std::lock_guard lock(table_mu_);
        auto it = slots_.find(frame.src);
        if (it != slots_.end()) slot = it->second.get();
    }
    const RxAction stop{RxKind::send_stop, {}, frame.src, false};
    if (slot == nullptr) {
        std::lock_guard lock(counters_mu_);
        ++unregistered_source_;
        return stop;
    }

    std::lock_guard lock(slot->mu);
    if (!slot->started) {
        std::lock_guard counters(counters_mu_);
        ++unregistered_source_;
        return stop;
    }
    const SeqNum& seq = frame.seq;
    if (seq.pkt >= kPacketsPerSet) {
        ++slot->bad_pkt_index;
        return {};
    }
    if (frame.payload.size() != kPayloadBytes) {
        ++slot->bad_payload;
        return {};
    }

    const RxAction ack{RxKind::send_ack, seq, frame.src, false};
    const int d = set_distance(slot->expected_set, seq.set);
    if (d == 0 || d == 1) {
        const std::uint32_t bit = 1u << seq.pkt;
        if (slot->bitmaps[d] & bit) {
            ++slot->duplicates;
            return ack;
        }
        const std::uint64_t at = (slot->completed_sets + d) * kSetBytes + seq.pkt * kPayloadBytes;
        if (at + kPayloadBytes > slot->tail + slot->capacity()) {
            ++slot->dropped_no_space;
            return {};
        }
        std::memcpy(slot->ring.data() + slot->set_base[d] + seq.pkt * kPayloadBytes, frame.payload.data(),
                    kPayloadBytes);
        slot->bitmaps[d] |= bit;
        ++slot->stored;
        slot->advance_head();
        RxAction stored = ack;
        stored.stored = true;
        return stored;
    }
    const auto behind = static_cast<std::uint64_t>(-static_cast<std::int64_t>(d));
    if (d < 0 && behind <= slot->ring_sets - 1 && behind <= slot->completed_sets) {
        ++slot->late_acks;
        return ack;
    }
    if (d > 1) ++slot->future_set;
    else ++slot->stale_set;
    return {};
}

RingPointers ReceiverCore::read_ptrs(const MacAddr& mac) const {
    const Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    return RingPointers{static_cast<std::size_t>(slot.head % slot.capacity()),
                        static_cast<std::size_t>(slot.tail % slot.capacity()),
                        static_cast<std::size_t>(slot.head - slot.tail)};
}

void ReceiverCore::write_ptrs(const MacAddr& mac, std::size_t consumed) {
    Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    if (consumed > slot.head - slot.tail) {
        throw ReceiverError(ReceiverErrc::range, "consumed " + std::to_string(consumed) + " bytes, only " +
                                                     std::to_string(slot.head - slot.tail) + " available");
    }
    slot.tail += consumed;
}

bool ReceiverCore::poll_ready(const MacAddr& mac) const {
    const Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    return slot.head - slot.tail >= slot.wakeup_threshold;
}

void ReceiverCore::set_wakeup(const MacAddr& mac, std::size_t threshold) {
    Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    slot.wakeup_threshold = threshold;
}

std::size_t ReceiverCore::get_buf_len(const MacAddr& mac) const {
    const Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    return slot.capacity();
}

std::span<const std::uint8_t> ReceiverCore::ring(const MacAddr& mac) const {
    const Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    return slot.ring;
}

std::vector<std::uint8_t> ReceiverCore::consume(const MacAddr& mac, std::size_t max_bytes) {
    Slot& slot = find(mac);
    std::lock_guard lock(slot.mu);
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(slot.head - slot.tail, max_bytes));
    std::vector<std::uint8_t> out(n);
    const std::size_t cap = slot.capacity();
    const std::size_t start = static_cast<std::size_t>(slot.tail % cap);
    const std::size_t first = std::min(n, cap - start);
    std::memcpy(out.data(), slot.ring.data() + start, first);
    std::memcpy(out.data() + first, slot.ring.data(), n - first);
    slot.tail += n;
    return out;
}

std::size_t ReceiverCore::slot_count() const {
    std::lock_guard lock(table_mu_);
    return slots_.size();
}

std::map<std::string, std::int64_t> ReceiverCore::metrics() const {
    std::map<std::string, std::int64_t> m;
    {
        std::lock_guard lock(counters_mu_);
        m["unregistered_source"] = unregistered_source_;
        m["unexpected_kind"] = unexpected_kind_;
    }
    std::int64_t bad_pkt = 0, stale = 0, future = 0;
    std::lock_guard lock(table_mu_);
    for (const auto& [mac, slot] : slots_) {
        std::lock_guard slot_lock(slot->mu);
        const std::string p = "feb." + mac.to_string() + ".";
        m[p + "head"] = static_cast<std::int64_t>(slot->head % slot->capacity());
        m[p + "tail"] = static_cast<std::int64_t>(slot->tail % slot->capacity());
        m[p + "available"] = static_cast<std::int64_t>(slot->head - slot->tail);
        m[p + "bytes_received"] = static_cast<std::int64_t>(slot->head);
        m[p + "expected_set"] = slot->expected_set;
        m[p + "stored"] = slot->stored;
        m[p + "duplicates"] = slot->duplicates;
        m[p + "late_acks"] = slot->late_acks;
        m[p + "dropped_no_space"] = slot->dropped_no_space;
        m[p + "bad_pkt_index"] = slot->bad_pkt_index;
        m[p + "bad_payload"] = slot->bad_payload;
        m[p + "stale_set"] = slot->stale_set;
        m[p + "future_set"] = slot->future_set;
        bad_pkt += slot->bad_pkt_index;
        stale += slot->stale_set;
        future += slot->future_set;
    }
    m["bad_pkt_index"] = bad_pkt;
    m["stale_set"] = stale;
    m["future_set"] = future;
    return m;
}

}  // namespace fade
