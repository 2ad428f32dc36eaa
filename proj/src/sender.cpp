#include "fade/sender.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace fade {

SenderCore::SenderCore(const MacAddr& mac, const MacAddr& host_mac, const NcaParams& params)
    : mac_(mac), host_mac_(host_mac), params_(params), nca_(NcaState::initial(params)) {
    params_.validate();
}

bool SenderCore::offer_word(std::uint32_t word) {
    if (!running_ || !data_ready_) return false;
    auto& buf = buffers_[head_];
    buf[fill_offset_] = static_cast<std::uint8_t>(word >> 24);
    buf[fill_offset_ + 1] = static_cast<std::uint8_t>(word >> 16);
    buf[fill_offset_ + 2] = static_cast<std::uint8_t>(word >> 8);
    buf[fill_offset_ + 3] = static_cast<std::uint8_t>(word);
    fill_offset_ += 4;
    if (fill_offset_ == kPayloadBytes) {
        descriptors_[head_].valid = true;
        data_ready_ = false;
    }
    return true;
}

std::size_t SenderCore::offer_words(std::span<const std::uint32_t> words) {
    if (!running_ || !data_ready_) return 0;
    const std::size_t n = std::min(words.size(), (kPayloadBytes - fill_offset_) / 4);
    std::uint8_t* out = buffers_[head_].data() + fill_offset_;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t w =
            std::endian::native == std::endian::little ? __builtin_bswap32(words[i]) : words[i];
        std::memcpy(out + 4 * i, &w, 4);
    }
    fill_offset_ += 4 * n;
    if (fill_offset_ == kPayloadBytes) {
        descriptors_[head_].valid = true;
        data_ready_ = false;
    }
    return n;
}

SendAction SenderCore::step(Nanos now, bool transmitter_ready) {
    if (!running_) return {};

    if (!ack_fifo_.empty()) {
        const SeqNum seq = ack_fifo_.front();
        ack_fifo_.pop_front();
        on_ack(seq);
        return SendAction{StepTask::ack, std::nullopt, now, false};
    }

    if (!data_ready_ && try_advance_head()) return SendAction{StepTask::head, std::nullopt, now, false};

    if (head_ == tail_ || !transmitter_ready) return {};
    if (!eligible(retr_)) retr_ = seek_retr(retr_);
    if (!eligible(retr_)) return {};
    if (last_transmit_ && now < earliest_next_transmit(nca_, *last_transmit_)) return {};
    return transmit(now);
}

SendAction SenderCore::transmit(Nanos now) {
    auto& desc = descriptors_[retr_];
    const bool resend = desc.sent;
    const SeqNum seq{desc.set_number, 0, static_cast<std::uint8_t>(retr_)};

    SendAction action;
    action.task = StepTask::transmit;
    action.frame = make_data(host_mac_, mac_, seq, reported_delay_us(nca_), buffers_[retr_]);
    action.not_before = now;
    action.resend = resend;

    desc.sent = true;
    record_transmission(nca_, params_, resend);
    last_transmit_ = now;
    ++transmissions_;
    if (resend) ++retransmissions_;
    retr_ = seek_retr(next(retr_));
    return action;
}

void SenderCore::on_ack(const SeqNum& seq) {
    if (seq.pkt >= kPacketsPerSet) return;
    auto& desc = descriptors_[seq.pkt];
    if (desc.set_number != seq.set) return;
    // A descriptor that was never transmitted cannot have been received.
    if (!desc.valid || !desc.sent) return;
    desc.confirmed = true;

    if (seq.pkt == tail_) {
        while (tail_ != head_ && descriptors_[tail_].confirmed) tail_ = next(tail_);
    }
    if (seq.pkt == retr_ || !in_window(retr_)) retr_ = seek_retr(retr_);
}

void SenderCore::enqueue_ack(const SeqNum& seq) {
    if (ack_fifo_.size() == kAckQueueDepth) {
        ack_fifo_.pop_front();
        ++acks_overflowed_;
    }
    ack_fifo_.push_back(seq);
}

void SenderCore::on_command(Command cmd) {
    if (cmd == Command::stop) {
        running_ = false;
        return;
    }
    descriptors_.fill(PacketDescriptor{});
    head_ = tail_ = retr_ = 0;
    fill_offset_ = 0;
    current_set_ = 0;
    nca_ = NcaState::initial(params_);
    last_transmit_.reset();
    ack_fifo_.clear();
    running_ = true;
    data_ready_ = true;
}

bool SenderCore::try_advance_head() {
    const std::size_t new_head = next(head_);
    if (new_head == tail_) return false;
    if (new_head == 0) ++current_set_;
    head_ = new_head;
    descriptors_[head_] = PacketDescriptor{false, false, false, current_set_};
    fill_offset_ = 0;
    data_ready_ = true;
    if (!in_window(retr_)) retr_ = seek_retr(tail_);
    return true;
}

bool SenderCore::in_window(std::size_t i) const noexcept {
    const std::size_t span = (head_ + kPacketsPerSet - tail_) % kPacketsPerSet;
    return (i + kPacketsPerSet - tail_) % kPacketsPerSet < span;
}

bool SenderCore::eligible(std::size_t i) const noexcept {
    return in_window(i) && descriptors_[i].valid && !descriptors_[i].confirmed;
}

std::size_t SenderCore::seek_retr(std::size_t from) const noexcept {
    if (head_ == tail_) return tail_;
    std::size_t r = in_window(from) ? from : tail_;
    for (std::size_t k = 0; k < kPacketsPerSet; ++k) {
        if (r == head_) r = tail_;
        if (eligible(r)) return r;
        r = next(r);
    }
    return tail_;
}

std::size_t SenderCore::outstanding() const noexcept {
    std::size_t n = 0;
    for (const auto& d : descriptors_) n += d.valid && !d.confirmed;
    return n;
}

bool SenderCore::has_transmittable() const noexcept {
    for (std::size_t i = tail_; i != head_; i = next(i)) {
        if (eligible(i)) return true;
    }
    return false;
}

std::optional<Nanos> SenderCore::next_transmit_time() const {
    if (!running_ || !has_transmittable()) return std::nullopt;
    if (!last_transmit_) return Nanos{0};
    return earliest_next_transmit(nca_, *last_transmit_);
}

std::string SenderCore::trace_record() const {
    std::string flags(kPacketsPerSet, '-');
    for (std::size_t i = 0; i < kPacketsPerSet; ++i) {
        const auto& d = descriptors_[i];
        if (d.confirmed) flags[i] = 'C';
        else if (d.sent) flags[i] = 'S';
        else if (d.valid) flags[i] = 'V';
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "head=%zu tail=%zu retr=%zu set=%u fill=%zu ready=%d run=%d delay_ns=%lld flags=",
                  head_, tail_, retr_, static_cast<unsigned>(current_set_), fill_offset_, data_ready_ ? 1 : 0,
                  running_ ? 1 : 0, static_cast<long long>(nca_.delay.count()));
    return buf + flags;
}

}  // namespace fade
