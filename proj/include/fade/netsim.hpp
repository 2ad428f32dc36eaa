#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fade/nca.hpp"
#include "fade/receiver.hpp"
#include "fade/rng.hpp"
#include "fade/sender.hpp"
#include "fade/wire.hpp"

namespace fade {

using NodeId = std::size_t;
using PortId = std::size_t;

enum class EventKind { frame_arrival, node_poll, metric_sample };

/// Events run ordered by (at, order); order is the insertion sequence.
struct SimEvent {
    Nanos at{0};
    std::uint64_t order = 0;
    EventKind kind = EventKind::node_poll;
    NodeId node = 0;
    PortId port = 0;
    std::uint64_t tag = 0;
    Frame frame;
};

class Simulator;

class Node {
public:
    virtual ~Node() = default;

    virtual void on_frame(Simulator& sim, PortId port, Frame frame) = 0;
    virtual void on_poll(Simulator& /*sim*/, std::uint64_t /*tag*/) {}

    const std::string& name() const noexcept { return name_; }
    NodeId id() const noexcept { return id_; }

protected:
    explicit Node(std::string name) : name_(std::move(name)) {}

private:
    friend class Simulator;
    std::string name_;
    NodeId id_ = std::numeric_limits<NodeId>::max();
};

/// Single-threaded discrete-event loop over integer-nanosecond time.
class Simulator {
public:
    Simulator() = default;
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    /// Registers a node; the simulator does not take ownership.
    NodeId add_node(Node& node);

    Nanos now() const noexcept { return now_; }

    /// Throws std::logic_error when ev.at lies in the past.
    void schedule(SimEvent ev);
    void schedule_frame(Nanos at, NodeId node, PortId port, Frame frame);
    void schedule_poll(Nanos at, NodeId node, std::uint64_t tag = 0);
    void schedule_sample(Nanos at, std::uint64_t tag = 0);

    void set_sample_handler(std::function<void(Simulator&, std::uint64_t)> handler) {
        sample_handler_ = std::move(handler);
    }

    /// Executes every event with at <= t_end, then sets now to t_end.
    void run_until(Nanos t_end);

    std::size_t pending() const noexcept { return queue_.size(); }
    std::uint64_t events_processed() const noexcept { return processed_; }

    /// Enables the comma-separated frame trace. Writes the header line.
    void set_trace(std::ostream* out);
    bool tracing() const noexcept { return trace_ != nullptr; }
    void trace(std::string_view node, std::string_view direction, const Frame& frame, std::string_view disposition);

private:
    static bool later(const SimEvent& a, const SimEvent& b) noexcept {
        return a.at != b.at ? a.at > b.at : a.order > b.order;
    }

    Nanos now_{0};
    std::uint64_t next_order_ = 0;
    std::uint64_t processed_ = 0;
    std::vector<SimEvent> queue_;
    std::vector<Node*> nodes_;
    std::function<void(Simulator&, std::uint64_t)> sample_handler_;
    std::ostream* trace_ = nullptr;
};

struct LinkParams {
    std::uint64_t rate_bps = 1'000'000'000;
    Nanos propagation{0};
    double loss_prob = 0.0;
    double dup_prob = 0.0;
    Nanos reorder_jitter{0};
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// Time to clock `bytes` onto a link, rounded up to whole nanoseconds.
Nanos serialization_delay(std::size_t bytes, std::uint64_t rate_bps);

struct LinkStats {
    std::uint64_t sent = 0;
    std::uint64_t duplicated = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered = 0;
    std::uint64_t in_flight = 0;
};

/// One direction of a point-to-point link. The transmitter serializes one
/// frame at a time; frames handed over while it is busy start when it frees.
class Link : public Node {
public:
    Link(std::string name, const LinkParams& params);

    void connect(Node& dest, PortId dest_port);

    /// Starts sending at max(t_start, busy_until()) and returns the time the
    /// last bit leaves. The frame may be lost, duplicated or jittered.
    Nanos transmit(Simulator& sim, Frame frame, Nanos t_start);

    Nanos busy_until() const noexcept { return busy_until_; }
    bool idle_at(Nanos t) const noexcept { return busy_until_ <= t; }
    const LinkParams& params() const noexcept { return params_; }
    const LinkStats& stats() const noexcept { return stats_; }

    void on_frame(Simulator& sim, PortId port, Frame frame) override;

private:
    LinkParams params_;
    SplitMix64 rng_;
    Node* dest_ = nullptr;
    PortId dest_port_ = 0;
    Nanos busy_until_{0};
    LinkStats stats_;
};

struct SwitchParams {
    std::size_t egress_queue_frames = 16;
    std::map<MacAddr, PortId> forwarding;

    void validate() const;
};

struct SwitchStats {
    std::uint64_t arrivals = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t queue_drops = 0;
    std::uint64_t unknown_dst = 0;
};

/// Store-and-forward switch with a drop-tail FIFO per egress port. The
/// queue bound counts the frame currently being transmitted.
class Switch : public Node {
public:
    Switch(std::string name, const SwitchParams& params);

    /// Adds a port whose egress side is `egress`; returns its id.
    PortId add_port(Link& egress);
    void learn(const MacAddr& mac, PortId port) { params_.forwarding[mac] = port; }

    void on_frame(Simulator& sim, PortId ingress, Frame frame) override;
    void on_poll(Simulator& sim, std::uint64_t port) override;

    const SwitchStats& stats() const noexcept { return stats_; }
    std::size_t queued(PortId port) const;
    std::size_t max_queued(PortId port) const { return ports_.at(port).max_depth; }

private:
    struct Port {
        Link* egress = nullptr;
        std::deque<Frame> waiting;
        bool busy = false;
        std::size_t max_depth = 0;
    };

    void start_next(Simulator& sim, PortId port);

    SwitchParams params_;
    std::vector<Port> ports_;
    SwitchStats stats_;
};

/// Supplies the 32-bit input words of a front-end board.
class DataSource {
public:
    virtual ~DataSource() = default;
    /// Words ready to be written at time `now`.
    virtual std::size_t available_words(Nanos now) = 0;
    /// Consumes the next out.size() words (out.size() <= available_words).
    virtual void read_words(std::span<std::uint32_t> out) = 0;
    /// When more words will appear, if ever.
    virtual std::optional<Nanos> next_data_time(Nanos now) = 0;
};

struct NcaWindowRecord {
    Nanos at{0};
    std::uint32_t sent = 0;
    std::uint32_t resent = 0;
    Nanos delay_before{0};
    Nanos delay_after{0};
};

struct LatencyStats {
    std::uint64_t count = 0;
    Nanos min{std::numeric_limits<Nanos::rep>::max()};
    Nanos max{0};
    Nanos total{0};

    void add(Nanos v) noexcept;
    Nanos mean() const noexcept { return count ? Nanos{total.count() / static_cast<Nanos::rep>(count)} : Nanos{0}; }
};

/// Front-end board: a SenderCore fed from a DataSource and wired to an
/// uplink. START/STOP/ACK frames arrive through on_frame.
class FebNode : public Node {
public:
    FebNode(std::string name, const MacAddr& mac, const NcaParams& params, DataSource& source);

    void attach_uplink(Link& uplink) { uplink_ = &uplink; }

    void on_frame(Simulator& sim, PortId port, Frame frame) override;
    void on_poll(Simulator& sim, std::uint64_t tag) override;

    const SenderCore& core() const noexcept { return core_; }
    const std::vector<NcaWindowRecord>& nca_windows() const noexcept { return windows_; }
    /// Transmission-to-ACK time, sampled only for buffers sent once.
    const LatencyStats& rtt() const noexcept { return rtt_; }

    /// Called after every step() with the post-step core state.
    void set_step_observer(std::function<void(const SenderCore&)> fn) { observer_ = std::move(fn); }

private:
    void pump(Simulator& sim);
    void feed(Nanos now);
    void schedule_wake(Simulator& sim, Nanos at);

    SenderCore core_;
    DataSource& source_;
    Link* uplink_ = nullptr;
    std::vector<std::uint32_t> scratch_;
    std::array<Nanos, kPacketsPerSet> last_tx_{};
    std::array<bool, kPacketsPerSet> resent_{};
    std::optional<Nanos> pending_wake_;
    std::vector<NcaWindowRecord> windows_;
    LatencyStats rtt_;
    std::function<void(const SenderCore&)> observer_;
};

/// Host running the ReceiverCore. Frames are handled one at a time, each
/// taking per_frame_processing; arrivals during processing wait in an
/// unbounded queue. Replies leave on the uplink when handling completes.
class HostNode : public Node {
public:
    HostNode(std::string name, ReceiverCore& core, Nanos per_frame_processing);

    void attach_uplink(Link& uplink) { uplink_ = &uplink; }

    /// Registers a board with the receiver and sends its START frame now.
    void start_feb(Simulator& sim, const MacAddr& mac, std::size_t ring_sets);
    void stop_feb(Simulator& sim, const MacAddr& mac);

    void on_frame(Simulator& sim, PortId port, Frame frame) override;
    void on_poll(Simulator& sim, std::uint64_t tag) override;

    /// Called after a Data frame's payload was stored in the ring.
    void set_store_listener(std::function<void(Simulator&, const MacAddr&)> fn) { on_stored_ = std::move(fn); }

    /// Arrival-to-ACK-departure latency per board.
    const std::map<MacAddr, LatencyStats>& ack_latency() const noexcept { return ack_latency_; }
    std::uint64_t frames_handled() const noexcept { return handled_; }
    std::uint64_t stops_sent() const noexcept { return stops_sent_; }
    std::size_t max_backlog() const noexcept { return max_backlog_; }

private:
    struct Pending {
        Frame frame;
        Nanos arrived{0};
    };

    ReceiverCore& core_;
    Nanos processing_;
    Link* uplink_ = nullptr;
    std::deque<Pending> backlog_;
    bool busy_ = false;
    std::function<void(Simulator&, const MacAddr&)> on_stored_;
    std::map<MacAddr, LatencyStats> ack_latency_;
    std::uint64_t handled_ = 0;
    std::uint64_t stops_sent_ = 0;
    std::size_t max_backlog_ = 0;
};

/// Creates a HostNode running `core` and registers it with the simulator.
std::unique_ptr<HostNode> attach_receiver(Simulator& sim, ReceiverCore& core, Nanos per_frame_processing,
                                          std::string name = "host");

}  // namespace fade
