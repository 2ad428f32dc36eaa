#include <gtest/gtest.h>

#include <sstream>

#include "fade/netsim.hpp"

using namespace fade;
using namespace std::chrono_literals;

namespace {

const MacAddr kHost = MacAddr::parse("02:00:00:00:00:01");
const MacAddr kFebA = MacAddr::parse("02:00:00:00:00:10");
const MacAddr kFebB = MacAddr::parse("02:00:00:00:00:11");

struct Arrival {
    Nanos at;
    PortId port;
    Frame frame;
};

class Sink : public Node {
public:
    explicit Sink(std::string name = "sink") : Node(std::move(name)) {}
    void on_frame(Simulator& sim, PortId port, Frame frame) override {
        got.push_back({sim.now(), port, std::move(frame)});
    }
    void on_poll(Simulator& sim, std::uint64_t tag) override { polls.emplace_back(sim.now(), tag); }

    std::vector<Arrival> got;
    std::vector<std::pair<Nanos, std::uint64_t>> polls;
};

Frame data_frame(std::uint8_t pkt, const MacAddr& src = kFebA) {
    return make_data(kHost, src, {0, 0, pkt}, 1, std::vector<std::uint8_t>(kPayloadBytes, pkt));
}

// Endless source for FebNode tests.
class Endless : public DataSource {
public:
    std::size_t available_words(Nanos) override { return 1 << 16; }
    void read_words(std::span<std::uint32_t> out) override {
        for (auto& w : out) w = next_++;
    }
    std::optional<Nanos> next_data_time(Nanos now) override { return now; }

private:
    std::uint32_t next_ = 0;
};

}  // namespace

TEST(Simulator, EqualTimesRunInInsertionOrder) {
    Simulator sim;
    Sink s;
    sim.add_node(s);
    sim.schedule_poll(5ns, s.id(), 1);
    sim.schedule_poll(5ns, s.id(), 2);
    sim.schedule_poll(3ns, s.id(), 3);
    sim.schedule_poll(5ns, s.id(), 4);
    sim.run_until(10ns);
    ASSERT_EQ(s.polls.size(), 4u);
    EXPECT_EQ(s.polls[0].second, 3u);
    EXPECT_EQ(s.polls[1].second, 1u);
    EXPECT_EQ(s.polls[2].second, 2u);
    EXPECT_EQ(s.polls[3].second, 4u);
    EXPECT_EQ(sim.now(), 10ns);
}

TEST(Simulator, RunUntilZeroOnEmptyQueue) {
    Simulator sim;
    sim.run_until(0ns);
    EXPECT_EQ(sim.now(), 0ns);
    EXPECT_EQ(sim.events_processed(), 0u);
}

TEST(Simulator, SchedulingInThePastThrows) {
    Simulator sim;
    Sink s;
    sim.add_node(s);
    sim.run_until(100ns);
    EXPECT_THROW(sim.schedule_poll(99ns, s.id()), std::logic_error);
    EXPECT_NO_THROW(sim.schedule_poll(100ns, s.id()));
}

TEST(Simulator, EventsAfterHorizonStayQueued) {
    Simulator sim;
    Sink s;
    sim.add_node(s);
    sim.schedule_poll(50ns, s.id());
    sim.run_until(49ns);
    EXPECT_TRUE(s.polls.empty());
    EXPECT_EQ(sim.pending(), 1u);
    sim.run_until(50ns);
    EXPECT_EQ(s.polls.size(), 1u);
}

TEST(Link, SerializationDelays) {
    EXPECT_EQ(serialization_delay(1048, 1'000'000'000), 8384ns);
    EXPECT_EQ(serialization_delay(64, 1'000'000'000), 512ns);
    EXPECT_EQ(serialization_delay(1048, 100'000'000), 83840ns);
    EXPECT_EQ(serialization_delay(1, 3), 2'666'666'667ns);  // rounded up
}

TEST(Link, ArrivalIsSerializationPlusPropagation) {
    Simulator sim;
    Sink s;
    LinkParams p;
    p.propagation = 250us;
    Link link("l", p);
    sim.add_node(s);
    sim.add_node(link);
    link.connect(s, 3);
    const Nanos done = link.transmit(sim, data_frame(0), 0ns);
    EXPECT_EQ(done, 8384ns);
    // Back-to-back frames queue behind the transmitter.
    EXPECT_EQ(link.transmit(sim, make_ack(kFebA, kHost, {0, 0, 0}), 0ns), 8384ns + 512ns);
    sim.run_until(1s);
    ASSERT_EQ(s.got.size(), 2u);
    EXPECT_EQ(s.got[0].at, 8384ns + 250us);
    EXPECT_EQ(s.got[0].port, 3u);
    EXPECT_EQ(s.got[1].at, 8896ns + 250us);
}

TEST(Link, TotalLossDeliversNothing) {
    Simulator sim;
    Sink s;
    LinkParams p;
    p.loss_prob = 1.0;
    Link link("l", p);
    sim.add_node(s);
    sim.add_node(link);
    link.connect(s, 0);
    for (int i = 0; i < 100; ++i) link.transmit(sim, data_frame(1), sim.now());
    sim.run_until(1s);
    EXPECT_TRUE(s.got.empty());
    EXPECT_EQ(link.stats().dropped, 100u);
}

TEST(Link, ConservationWithLossAndDuplication) {
    Simulator sim;
    Sink s;
    LinkParams p;
    p.loss_prob = 0.2;
    p.dup_prob = 0.1;
    p.reorder_jitter = 20us;
    p.seed = 77;
    Link link("l", p);
    sim.add_node(s);
    sim.add_node(link);
    link.connect(s, 0);
    for (int i = 0; i < 5000; ++i) {
        link.transmit(sim, data_frame(static_cast<std::uint8_t>(i % 32)), sim.now());
        if (i == 2500) {
            sim.run_until(sim.now() + 10ms);
            // Mid-run: some frames are still in flight.
            const auto& st = link.stats();
            EXPECT_EQ(st.sent + st.duplicated, st.delivered + st.dropped + st.in_flight);
        }
    }
    const auto& st = link.stats();
    EXPECT_EQ(st.sent + st.duplicated, st.delivered + st.dropped + st.in_flight);
    sim.run_until(10s);
    EXPECT_EQ(st.in_flight, 0u);
    EXPECT_EQ(st.sent + st.duplicated, st.delivered + st.dropped);
    EXPECT_EQ(s.got.size(), st.delivered);
    EXPECT_GT(st.dropped, 800u);
    EXPECT_LT(st.dropped, 1200u);
    for (const auto& a : s.got) EXPECT_GE(a.at, 8384ns);
}

TEST(Link, NoJitterKeepsFifoOrder) {
    Simulator sim;
    Sink s;
    LinkParams p;
    p.propagation = 1us;
    Link link("l", p);
    sim.add_node(s);
    sim.add_node(link);
    link.connect(s, 0);
    for (std::uint8_t i = 0; i < 32; ++i) link.transmit(sim, data_frame(i), 0ns);
    sim.run_until(1s);
    ASSERT_EQ(s.got.size(), 32u);
    for (std::uint8_t i = 0; i < 32; ++i) EXPECT_EQ(s.got[i].frame.seq.pkt, i);
}

TEST(Switch, DropTailWithCapacityOne) {
    Simulator sim;
    Sink host;
    SwitchParams sp;
    sp.egress_queue_frames = 1;
    Switch sw("sw", sp);
    Link egress("egress", LinkParams{});
    Link in_a("a", LinkParams{});
    Link in_b("b", LinkParams{});
    for (Node* n : std::initializer_list<Node*>{&host, &sw, &egress, &in_a, &in_b}) sim.add_node(*n);
    egress.connect(host, 0);
    sw.learn(kHost, sw.add_port(egress));
    in_a.connect(sw, 1);
    in_b.connect(sw, 2);
    in_a.transmit(sim, data_frame(1, kFebA), 0ns);
    in_b.transmit(sim, data_frame(2, kFebB), 0ns);
    sim.run_until(1s);
    EXPECT_EQ(host.got.size(), 1u);
    EXPECT_EQ(sw.stats().queue_drops, 1u);
    EXPECT_EQ(sw.stats().forwarded, 1u);
}

TEST(Switch, UnknownDestinationIsCounted) {
    Simulator sim;
    Switch sw("sw", SwitchParams{});
    sim.add_node(sw);
    sim.schedule_frame(0ns, sw.id(), 0, data_frame(0));
    sim.run_until(1s);
    EXPECT_EQ(sw.stats().unknown_dst, 1u);
}

TEST(Switch, EmptyQueueAddsStoreAndForward) {
    Simulator sim;
    Sink host;
    Switch sw("sw", SwitchParams{});
    LinkParams lp;
    lp.propagation = 1us;
    Link egress("egress", lp);
    Link ingress("ingress", lp);
    for (Node* n : std::initializer_list<Node*>{&host, &sw, &egress, &ingress}) sim.add_node(*n);
    egress.connect(host, 0);
    sw.learn(kHost, sw.add_port(egress));
    ingress.connect(sw, 1);
    ingress.transmit(sim, data_frame(0), 0ns);
    sim.run_until(1s);
    ASSERT_EQ(host.got.size(), 1u);
    EXPECT_EQ(host.got[0].at, 2 * (8384ns + 1us));
}

TEST(Switch, QueueBoundHolds) {
    Simulator sim;
    Sink host;
    SwitchParams sp;
    sp.egress_queue_frames = 4;
    Switch sw("sw", sp);
    LinkParams slow;
    slow.rate_bps = 100'000'000;
    Link egress("egress", slow);
    Link in_a("a", LinkParams{});
    for (Node* n : std::initializer_list<Node*>{&host, &sw, &egress, &in_a}) sim.add_node(*n);
    egress.connect(host, 0);
    sw.learn(kHost, sw.add_port(egress));
    in_a.connect(sw, 1);
    for (std::uint8_t i = 0; i < 50; ++i) in_a.transmit(sim, data_frame(i % 32), 0ns);
    sim.run_until(1s);
    EXPECT_EQ(sw.max_queued(0), 4u);
    EXPECT_EQ(host.got.size() + sw.stats().queue_drops, 50u);
    EXPECT_GT(sw.stats().queue_drops, 0u);
}

TEST(HostNode, AckDepartsAfterProcessing) {
    for (const Nanos proc : {3us, 0us}) {
        Simulator sim;
        ReceiverCore rx(kHost, 1);
        Sink feb("feb");
        Link up("up", LinkParams{});
        sim.add_node(feb);
        sim.add_node(up);
        auto host = attach_receiver(sim, rx, proc);
        host->attach_uplink(up);
        up.connect(feb, 0);
        host->start_feb(sim, kFebA, 4);
        sim.run_until(1ms);
        sim.schedule_frame(sim.now(), host->id(), 0, data_frame(0));
        sim.run_until(2ms);
        ASSERT_EQ(feb.got.size(), 2u);
        EXPECT_EQ(feb.got[1].frame.kind, FrameKind::ack);
        EXPECT_EQ(feb.got[1].at, 1ms + proc + 512ns);
        EXPECT_EQ(host->ack_latency().at(kFebA).max, proc);
    }
}

TEST(HostNode, SerialProcessing) {
    Simulator sim;
    ReceiverCore rx(kHost, 1);
    Sink feb("feb");
    LinkParams fast;
    fast.rate_bps = 1'000'000'000'000;
    Link up("up", fast);
    sim.add_node(feb);
    sim.add_node(up);
    auto host = attach_receiver(sim, rx, 10us);
    host->attach_uplink(up);
    up.connect(feb, 0);
    rx.start_feb(kFebA);
    sim.schedule_frame(0ns, host->id(), 0, data_frame(0));
    sim.schedule_frame(0ns, host->id(), 0, data_frame(1));
    sim.run_until(1ms);
    ASSERT_EQ(feb.got.size(), 2u);
    // Serialization at 1 Tb/s is 1 ns for a 64-byte ACK.
    EXPECT_EQ(feb.got[0].at, 10us + 1ns);
    EXPECT_EQ(feb.got[1].at, 20us + 1ns);
    EXPECT_EQ(host->max_backlog(), 2u);
}

TEST(HostNode, StopsUnregisteredBoard) {
    Simulator sim;
    ReceiverCore rx(kHost, 1);
    Sink feb("feb");
    Link up("up", LinkParams{});
    sim.add_node(feb);
    sim.add_node(up);
    auto host = attach_receiver(sim, rx, 3us);
    host->attach_uplink(up);
    up.connect(feb, 0);
    sim.schedule_frame(0ns, host->id(), 0, data_frame(0));
    sim.run_until(1ms);
    ASSERT_EQ(feb.got.size(), 1u);
    EXPECT_EQ(feb.got[0].frame.kind, FrameKind::stop);
    EXPECT_EQ(feb.got[0].frame.dst, kFebA);
    EXPECT_EQ(host->stops_sent(), 1u);
}

namespace {

// Board and host joined by two lossy links; returns the trace text.
std::string lossy_pair(std::uint64_t seed, std::uint64_t* stored) {
    std::ostringstream trace;
    Simulator sim;
    sim.set_trace(&trace);
    ReceiverCore rx(kHost, 1);
    Endless src;
    auto params = NcaParams::set1();
    params.initial_delay = 10us;
    FebNode feb("feb", kFebA, params, src);
    LinkParams lp;
    lp.loss_prob = 0.1;
    lp.dup_prob = 0.05;
    lp.reorder_jitter = 5us;
    lp.seed = seed;
    Link up("feb.up", lp);
    lp.seed = seed + 1;
    Link down("feb.down", lp);
    auto host = attach_receiver(sim, rx, 3us);
    sim.add_node(feb);
    sim.add_node(up);
    sim.add_node(down);
    feb.attach_uplink(up);
    up.connect(*host, 0);
    host->attach_uplink(down);
    down.connect(feb, 0);
    host->set_store_listener([&](Simulator&, const MacAddr& mac) { rx.consume(mac); });
    host->start_feb(sim, kFebA, 4);
    sim.run_until(50ms);
    *stored = static_cast<std::uint64_t>(rx.metrics().at("feb." + kFebA.to_string() + ".stored"));
    return trace.str();
}

}  // namespace

TEST(FebNode, LossyPairMakesProgressDeterministically) {
    std::uint64_t a = 0, b = 0;
    const std::string t1 = lossy_pair(5, &a);
    const std::string t2 = lossy_pair(5, &b);
    EXPECT_GT(a, 1000u);
    EXPECT_EQ(a, b);
    EXPECT_EQ(t1, t2);
    std::uint64_t c = 0;
    EXPECT_NE(lossy_pair(6, &c), t1);
}
