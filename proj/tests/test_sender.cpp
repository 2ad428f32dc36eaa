#include <gtest/gtest.h>

#include <set>

#include "fade/rng.hpp"
#include "fade/sender.hpp"

using namespace fade;
using namespace std::chrono_literals;

namespace {

const MacAddr kHost = MacAddr::parse("02:00:00:00:00:01");
const MacAddr kFeb = MacAddr::parse("02:00:00:00:00:10");

SenderCore started() {
    SenderCore c(kFeb, kHost);
    c.on_command(Command::start);
    return c;
}

void fill_buffer(SenderCore& c, std::uint32_t tag) {
    for (std::uint32_t i = 0; i < SenderCore::kWordsPerBuffer; ++i) ASSERT_TRUE(c.offer_word(tag + i));
}

// Runs step() at `now` until it performs a transmission or goes idle.
SendAction step_until_transmit(SenderCore& c, Nanos now) {
    for (;;) {
        SendAction a = c.step(now);
        if (a.task == StepTask::transmit || a.task == StepTask::idle) return a;
    }
}

}  // namespace

TEST(Sender, FreshCoreIsIdle) {
    SenderCore c(kFeb, kHost);
    EXPECT_FALSE(c.running());
    EXPECT_EQ(c.step(0ns).task, StepTask::idle);
    EXPECT_FALSE(c.offer_word(1));
}

TEST(Sender, EmptyStartedCoreTransmitsNothing) {
    auto c = started();
    EXPECT_EQ(c.step(0ns).task, StepTask::idle);
    EXPECT_EQ(c.head(), c.tail());
}

TEST(Sender, OneWordIsAcceptedWithoutDescriptorChange) {
    auto c = started();
    EXPECT_TRUE(c.offer_word(0xDEADBEEF));
    EXPECT_EQ(c.fill_offset(), 4u);
    EXPECT_FALSE(c.descriptor(0).valid);
    EXPECT_TRUE(c.data_ready());
    const auto b = c.buffer(0);
    EXPECT_EQ(b[0], 0xDE);
    EXPECT_EQ(b[3], 0xEF);
}

TEST(Sender, FullBufferBecomesValidAndBlocksInput) {
    auto c = started();
    fill_buffer(c, 0);
    EXPECT_TRUE(c.descriptor(0).valid);
    EXPECT_FALSE(c.data_ready());
    EXPECT_EQ(c.fill_offset(), kPayloadBytes);
    const auto before = c;
    EXPECT_FALSE(c.offer_word(7));
    EXPECT_EQ(c, before);
}

TEST(Sender, FirstTransmissionIsImmediate) {
    auto c = started();
    fill_buffer(c, 100);
    EXPECT_EQ(c.step(0ns).task, StepTask::head);
    EXPECT_EQ(c.head(), 1u);
    const auto a = c.step(0ns);
    ASSERT_EQ(a.task, StepTask::transmit);
    ASSERT_TRUE(a.frame);
    EXPECT_EQ(a.frame->seq, (SeqNum{0, 0, 0}));
    EXPECT_EQ(a.frame->kind, FrameKind::data);
    EXPECT_EQ(a.frame->dst, kHost);
    EXPECT_EQ(a.frame->src, kFeb);
    EXPECT_EQ(a.frame->delay_us, 200u);
    EXPECT_FALSE(a.resend);
    EXPECT_TRUE(c.descriptor(0).sent);
    EXPECT_TRUE(std::equal(a.frame->payload.begin(), a.frame->payload.end(), c.buffer(0).begin()));
}

TEST(Sender, DelayGatesRetransmission) {
    auto c = started();
    fill_buffer(c, 0);
    ASSERT_EQ(step_until_transmit(c, 0ns).task, StepTask::transmit);
    // Buffer 1 is now being filled; buffer 0 is the only one in the window.
    EXPECT_EQ(c.step(199'999ns).task, StepTask::idle);
    const auto a = c.step(200'000ns);
    ASSERT_EQ(a.task, StepTask::transmit);
    EXPECT_TRUE(a.resend);
    EXPECT_EQ(a.frame->seq.pkt, 0);
    EXPECT_EQ(c.retransmissions(), 1u);
}

TEST(Sender, TransmitterBusyHoldsTransmission) {
    auto c = started();
    fill_buffer(c, 0);
    c.step(0ns);
    EXPECT_EQ(c.step(0ns, false).task, StepTask::idle);
    EXPECT_EQ(c.step(0ns, true).task, StepTask::transmit);
}

TEST(Sender, AckForTailAdvancesTailByOne) {
    auto c = started();
    Nanos t{0};
    for (int k = 0; k < 3; ++k) {
        fill_buffer(c, k * 1000);
        ASSERT_EQ(step_until_transmit(c, t).task, StepTask::transmit);
        t += 200us;
    }
    EXPECT_EQ(c.tail(), 0u);
    c.on_ack({0, 0, 0});
    EXPECT_EQ(c.tail(), 1u);
    EXPECT_TRUE(c.descriptor(0).confirmed);
}

TEST(Sender, AckForNonTailOnlySetsConfirmed) {
    auto c = started();
    Nanos t{0};
    for (int k = 0; k < 3; ++k) {
        fill_buffer(c, k);
        step_until_transmit(c, t);
        t += 200us;
    }
    // The sweep resends buffer 0 before reaching the newer buffers.
    while (!c.descriptor(2).sent) {
        ASSERT_EQ(step_until_transmit(c, t).task, StepTask::transmit);
        t += 200us;
    }
    c.on_ack({0, 0, 2});
    EXPECT_TRUE(c.descriptor(2).confirmed);
    EXPECT_EQ(c.tail(), 0u);
    c.on_ack({0, 0, 0});
    EXPECT_EQ(c.tail(), 1u);
    c.on_ack({0, 0, 1});
    EXPECT_EQ(c.tail(), 3u);
}

TEST(Sender, StaleAckLeavesStateIdentical) {
    auto c = started();
    fill_buffer(c, 0);
    step_until_transmit(c, 0ns);
    const auto before = c;
    c.on_ack({1, 0, 0});
    EXPECT_EQ(c, before);
    c.on_ack({0xFFFF, 0, 0});
    EXPECT_EQ(c, before);
}

TEST(Sender, AckForUnsentBufferIsIgnored) {
    auto c = started();
    fill_buffer(c, 0);
    c.step(0ns);  // head advance only
    const auto before = c;
    c.on_ack({0, 0, 0});
    EXPECT_EQ(c, before);
}

TEST(Sender, HeadStopsOneShortOfTail) {
    auto c = started();
    for (std::size_t k = 0; k < kPacketsPerSet; ++k) {
        fill_buffer(c, static_cast<std::uint32_t>(k));
        while (c.step(0ns, false).task != StepTask::idle) {
        }
    }
    EXPECT_EQ(c.head(), kPacketsPerSet - 1);
    EXPECT_EQ(c.tail(), 0u);
    EXPECT_FALSE(c.data_ready());
    EXPECT_EQ(c.outstanding(), kPacketsPerSet);
    EXPECT_EQ(c.step(0ns, false).task, StepTask::idle);
}

TEST(Sender, SetIncrementsWhenHeadWraps) {
    auto c = started();
    Nanos t{0};
    for (std::size_t k = 0; k < kPacketsPerSet + 2; ++k) {
        fill_buffer(c, static_cast<std::uint32_t>(k));
        const auto a = step_until_transmit(c, t);
        ASSERT_EQ(a.task, StepTask::transmit) << k;
        EXPECT_EQ(a.frame->seq.pkt, k % kPacketsPerSet);
        EXPECT_EQ(a.frame->seq.set, k / kPacketsPerSet);
        c.on_ack(a.frame->seq);
        t += 200us;
    }
    EXPECT_EQ(c.current_set(), 1u);
}

TEST(Sender, StopHaltsAndStartResets) {
    auto c = started();
    fill_buffer(c, 0);
    step_until_transmit(c, 0ns);
    c.on_command(Command::stop);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(c.step(Nanos{i * 1'000'000}).task, StepTask::idle);
    c.on_command(Command::stop);
    EXPECT_FALSE(c.running());

    c.on_command(Command::start);
    fill_buffer(c, 5);
    const auto a = step_until_transmit(c, 10ms);
    ASSERT_EQ(a.task, StepTask::transmit);
    EXPECT_EQ(a.frame->seq, (SeqNum{0, 0, 0}));
    EXPECT_EQ(c.nca().delay, 200us);
}

TEST(Sender, StartIsIdempotent) {
    auto once = started();
    auto twice = started();
    twice.on_command(Command::start);
    EXPECT_EQ(once, twice);
}

TEST(Sender, AckQueueDropsOldest) {
    auto c = started();
    for (std::uint16_t i = 0; i < 65; ++i) c.enqueue_ack({i, 0, 0});
    EXPECT_EQ(c.pending_acks(), SenderCore::kAckQueueDepth);
    EXPECT_EQ(c.acks_overflowed(), 1u);
}

TEST(Sender, AckHasPriorityOverTransmission) {
    auto c = started();
    fill_buffer(c, 0);
    c.step(0ns);
    c.enqueue_ack({0, 0, 9});
    EXPECT_EQ(c.step(0ns).task, StepTask::ack);
    EXPECT_EQ(c.step(0ns).task, StepTask::transmit);
}

// Random lossy loop driven directly against the core: checks the descriptor
// invariants after every step and that everything offered is confirmed.
TEST(Sender, InvariantsAndLivenessUnderRandomLoss) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SplitMix64 rng(seed);
        auto p = NcaParams::set1();
        p.initial_delay = 1us;
        SenderCore c(kFeb, kHost, p);
        c.on_command(Command::start);
        const std::size_t total_buffers = 200;
        std::size_t filled = 0;
        std::uint32_t word = 0;
        std::vector<SeqNum> in_flight;
        Nanos t{0};
        for (int iter = 0; iter < 200000 && !(filled == total_buffers && c.outstanding() == 0); ++iter) {
            while (filled < total_buffers && c.data_ready()) {
                c.offer_word(word++);
                if (c.fill_offset() == kPayloadBytes) ++filled;
            }
            const auto a = c.step(t);
            if (a.frame && !rng.bernoulli(0.3)) in_flight.push_back(a.frame->seq);
            if (!in_flight.empty() && rng.bernoulli(0.5)) {
                const std::size_t k = rng.below(in_flight.size());
                const SeqNum s = in_flight[k];
                in_flight.erase(in_flight.begin() + static_cast<std::ptrdiff_t>(k));
                if (!rng.bernoulli(0.3)) c.enqueue_ack(s);
            }
            std::set<std::uint16_t> sets;
            std::size_t outstanding = 0;
            for (std::size_t i = 0; i < kPacketsPerSet; ++i) {
                const auto& d = c.descriptor(i);
                if (d.confirmed || d.sent) ASSERT_TRUE(d.valid);
                if (d.valid) sets.insert(d.set_number);
                outstanding += d.valid && !d.confirmed;
            }
            ASSERT_LE(outstanding, kPacketsPerSet);
            ASSERT_LE(sets.size(), 2u);
            if (sets.size() == 2) {
                const int dist = set_distance(*sets.begin(), *sets.rbegin());
                ASSERT_TRUE(dist == 1 || dist == -1);
            }
            const std::size_t span = (c.head() + kPacketsPerSet - c.tail()) % kPacketsPerSet;
            ASSERT_LE((c.retr() + kPacketsPerSet - c.tail()) % kPacketsPerSet, span);
            t += 1us;
        }
        EXPECT_EQ(filled, total_buffers) << "seed " << seed;
        EXPECT_EQ(c.outstanding(), 0u) << "seed " << seed;
    }
}
