#include "fade/netsim.hpp"

#include <algorithm>
#include <stdexcept>

namespace fade {

// ---------------------------------------------------------------- Simulator

NodeId Simulator::add_node(Node& node) {
    node.id_ = nodes_.size();
    nodes_.push_back(&node);
    return node.id_;
}

void Simulator::schedule(SimEvent ev) {
    if (ev.at < now_) {
        throw std::logic_error("event scheduled in the past (" + std::to_string(ev.at.count()) + " < " +
                               std::to_string(now_.count()) + ")");
    }
    if (ev.kind != EventKind::metric_sample && ev.node >= nodes_.size()) {
        throw std::logic_error("event for unknown node");
    }
    ev.order = next_order_++;
    queue_.push_back(std::move(ev));
    std::push_heap(queue_.begin(), queue_.end(), later);
}

void Simulator::schedule_frame(Nanos at, NodeId node, PortId port, Frame frame) {
    schedule(SimEvent{at, 0, EventKind::frame_arrival, node, port, 0, std::move(frame)});
}

void Simulator::schedule_poll(Nanos at, NodeId node, std::uint64_t tag) {
    schedule(SimEvent{at, 0, EventKind::node_poll, node, 0, tag, {}});
}

void Simulator::schedule_sample(Nanos at, std::uint64_t tag) {
    schedule(SimEvent{at, 0, EventKind::metric_sample, 0, 0, tag, {}});
}

void Simulator::run_until(Nanos t_end) {
    while (!queue_.empty() && queue_.front().at <= t_end) {
        std::pop_heap(queue_.begin(), queue_.end(), later);
        SimEvent ev = std::move(queue_.back());
        queue_.pop_back();
        now_ = ev.at;
        ++processed_;
        switch (ev.kind) {
            case EventKind::frame_arrival:
                nodes_[ev.node]->on_frame(*this, ev.port, std::move(ev.frame));
                break;
            case EventKind::node_poll:
                nodes_[ev.node]->on_poll(*this, ev.tag);
                break;
            case EventKind::metric_sample:
                if (sample_handler_) sample_handler_(*this, ev.tag);
                break;
        }
    }
    if (t_end > now_) now_ = t_end;
}

void Simulator::set_trace(std::ostream* out) {
    trace_ = out;
    if (trace_) *trace_ << "time_ns,node,direction,kind,set,pkt,size,disposition\n";
}

void Simulator::trace(std::string_view node, std::string_view direction, const Frame& frame,
                      std::string_view disposition) {
    if (!trace_) return;
    const bool numbered = frame.kind == FrameKind::data || frame.kind == FrameKind::ack;
    *trace_ << now_.count() << ',' << node << ',' << direction << ',' << to_string(frame.kind) << ',';
    if (numbered) *trace_ << frame.seq.set << ',' << unsigned{frame.seq.pkt};
    else *trace_ << ',';
    *trace_ << ',' << frame.wire_size() << ',' << disposition << '\n';
}

// --------------------------------------------------------------------- Link

void LinkParams::validate() const {
    if (rate_bps == 0) throw std::invalid_argument("rate_bps must be positive");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw std::invalid_argument("loss_prob must lie in [0, 1]");
    if (!(dup_prob >= 0.0 && dup_prob <= 1.0)) throw std::invalid_argument("dup_prob must lie in [0, 1]");
    if (propagation.count() < 0) throw std::invalid_argument("propagation must be non-negative");
    if (reorder_jitter.count() < 0) throw std::invalid_argument("reorder_jitter must be non-negative");
}

Nanos serialization_delay(std::size_t bytes, std::uint64_t rate_bps) {
    const u128 bits_ns = static_cast<u128>(bytes) * 8u * 1'000'000'000u;
    return Nanos{static_cast<Nanos::rep>((bits_ns + rate_bps - 1) / rate_bps)};
}

Link::Link(std::string name, const LinkParams& params) : Node(std::move(name)), params_(params), rng_(params.seed) {
    params_.validate();
}

void Link::connect(Node& dest, PortId dest_port) {
    dest_ = &dest;
    dest_port_ = dest_port;
}

Nanos Link::transmit(Simulator& sim, Frame frame, Nanos t_start) {
    const Nanos start = std::max({t_start, busy_until_, sim.now()});
    const Nanos done = start + serialization_delay(frame.wire_size(), params_.rate_bps);
    busy_until_ = done;
    ++stats_.sent;

    if (rng_.bernoulli(params_.loss_prob)) {
        ++stats_.dropped;
        sim.trace(name(), "out", frame, "lost");
        return done;
    }
    const bool duplicate = rng_.bernoulli(params_.dup_prob);
    const auto jitter = [this] {
        const auto j = params_.reorder_jitter.count();
        return Nanos{j > 0 ? static_cast<Nanos::rep>(rng_.below(static_cast<std::uint64_t>(j) + 1)) : 0};
    };
    sim.trace(name(), "out", frame, duplicate ? "duplicated" : "sent");
    if (duplicate) {
        ++stats_.duplicated;
        ++stats_.in_flight;
        sim.schedule_frame(done + params_.propagation + jitter(), id(), 0, frame);
    }
    ++stats_.in_flight;
    sim.schedule_frame(done + params_.propagation + jitter(), id(), 0, std::move(frame));
    return done;
}

void Link::on_frame(Simulator& sim, PortId /*port*/, Frame frame) {
    --stats_.in_flight;
    ++stats_.delivered;
    if (dest_ == nullptr) return;
    sim.trace(dest_->name(), "in", frame, "delivered");
    dest_->on_frame(sim, dest_port_, std::move(frame));
}

// ------------------------------------------------------------------- Switch

void SwitchParams::validate() const {
    if (egress_queue_frames < 1) throw std::invalid_argument("egress_queue_frames must be at least 1");
}

Switch::Switch(std::string name, const SwitchParams& params) : Node(std::move(name)), params_(params) {
    params_.validate();
}

PortId Switch::add_port(Link& egress) {
    ports_.push_back(Port{&egress, {}, false, 0});
    return ports_.size() - 1;
}

std::size_t Switch::queued(PortId port) const {
    const Port& p = ports_.at(port);
    return p.waiting.size() + (p.busy ? 1 : 0);
}

void Switch::on_frame(Simulator& sim, PortId /*ingress*/, Frame frame) {
    ++stats_.arrivals;
    auto it = params_.forwarding.find(frame.dst);
    if (it == params_.forwarding.end() || it->second >= ports_.size()) {
        ++stats_.unknown_dst;
        sim.trace(name(), "in", frame, "unknown_dst");
        return;
    }
    const PortId out = it->second;
    Port& port = ports_[out];
    if (queued(out) >= params_.egress_queue_frames) {
        ++stats_.queue_drops;
        sim.trace(name(), "in", frame, "queue_drop");
        return;
    }
    port.waiting.push_back(std::move(frame));
    port.max_depth = std::max(port.max_depth, queued(out));
    if (!port.busy) start_next(sim, out);
}

void Switch::on_poll(Simulator& sim, std::uint64_t port) {
    Port& p = ports_.at(port);
    p.busy = false;
    if (!p.waiting.empty()) start_next(sim, port);
}

void Switch::start_next(Simulator& sim, PortId out) {
    Port& port = ports_[out];
    Frame frame = std::move(port.waiting.front());
    port.waiting.pop_front();
    port.busy = true;
    ++stats_.forwarded;
    const Nanos done = port.egress->transmit(sim, std::move(frame), sim.now());
    sim.schedule_poll(done, id(), out);
}

// ------------------------------------------------------------------ FebNode

void LatencyStats::add(Nanos v) noexcept {
    ++count;
    min = std::min(min, v);
    max = std::max(max, v);
    total += v;
}

FebNode::FebNode(std::string name, const MacAddr& mac, const NcaParams& params, DataSource& source)
    : Node(std::move(name)), core_(mac, MacAddr{}, params), source_(source) {
    scratch_.reserve(SenderCore::kWordsPerBuffer);
}

void FebNode::on_frame(Simulator& sim, PortId /*port*/, Frame frame) {
    switch (frame.kind) {
        case FrameKind::ack:
            if (frame.seq.pkt < kPacketsPerSet) {
                const auto& d = core_.descriptor(frame.seq.pkt);
                // Karn's rule: a resent buffer's ACK cannot be matched to one transmission.
                if (d.set_number == frame.seq.set && d.sent && !d.confirmed && !resent_[frame.seq.pkt]) {
                    rtt_.add(sim.now() - last_tx_[frame.seq.pkt]);
                }
            }
            core_.enqueue_ack(frame.seq);
            break;
        case FrameKind::start:
            core_.set_host_mac(frame.src);
            core_.on_command(Command::start);
            break;
        case FrameKind::stop:
            core_.on_command(Command::stop);
            break;
        case FrameKind::data:
            return;
    }
    pump(sim);
}

void FebNode::on_poll(Simulator& sim, std::uint64_t /*tag*/) {
    if (pending_wake_ && *pending_wake_ <= sim.now()) pending_wake_.reset();
    pump(sim);
}

void FebNode::feed(Nanos now) {
    while (core_.running() && core_.data_ready()) {
        const std::size_t room = (kPayloadBytes - core_.fill_offset()) / 4;
        const std::size_t n = std::min(room, source_.available_words(now));
        if (n == 0) return;
        scratch_.resize(n);
        source_.read_words(scratch_);
        core_.offer_words(scratch_);
    }
}

void FebNode::pump(Simulator& sim) {
    const Nanos now = sim.now();
    for (;;) {
        feed(now);
        const NcaState before = core_.nca();
        SendAction action = core_.step(now, uplink_ != nullptr && uplink_->idle_at(now));
        if (observer_) observer_(core_);
        if (action.task == StepTask::idle) break;
        if (!action.frame) continue;

        if (core_.nca().c_pkt_sent == 0) {
            windows_.push_back(NcaWindowRecord{now, before.c_pkt_sent + 1, before.c_pkt_rsnt + (action.resend ? 1u : 0u),
                                               before.delay, core_.nca().delay});
        }
        last_tx_[action.frame->seq.pkt] = now;
        resent_[action.frame->seq.pkt] = action.resend;
        uplink_->transmit(sim, std::move(*action.frame), action.not_before);
    }

    std::optional<Nanos> wake;
    if (auto t = core_.next_transmit_time()) wake = std::max(*t, uplink_ ? uplink_->busy_until() : *t);
    if (core_.running() && core_.data_ready()) {
        if (auto t = source_.next_data_time(now)) wake = wake ? std::min(*wake, *t) : *t;
    }
    if (wake) schedule_wake(sim, std::max(*wake, now + Nanos{1}));
}

void FebNode::schedule_wake(Simulator& sim, Nanos at) {
    if (pending_wake_ && *pending_wake_ <= at) return;
    pending_wake_ = at;
    sim.schedule_poll(at, id());
}

// ----------------------------------------------------------------- HostNode

HostNode::HostNode(std::string name, ReceiverCore& core, Nanos per_frame_processing)
    : Node(std::move(name)), core_(core), processing_(per_frame_processing) {
    if (processing_.count() < 0) throw std::invalid_argument("per_frame_processing must be non-negative");
}

void HostNode::start_feb(Simulator& sim, const MacAddr& mac, std::size_t ring_sets) {
    Frame start = core_.start_feb(mac, ring_sets);
    if (uplink_) uplink_->transmit(sim, std::move(start), sim.now());
}

void HostNode::stop_feb(Simulator& sim, const MacAddr& mac) {
    Frame stop = core_.stop_feb(mac);
    if (uplink_) uplink_->transmit(sim, std::move(stop), sim.now());
}

void HostNode::on_frame(Simulator& sim, PortId /*port*/, Frame frame) {
    backlog_.push_back(Pending{std::move(frame), sim.now()});
    max_backlog_ = std::max(max_backlog_, backlog_.size());
    if (!busy_) {
        busy_ = true;
        sim.schedule_poll(sim.now() + processing_, id());
    }
}

void HostNode::on_poll(Simulator& sim, std::uint64_t /*tag*/) {
    Pending item = std::move(backlog_.front());
    backlog_.pop_front();
    ++handled_;

    const RxAction action = core_.handle_frame(item.frame);
    switch (action.kind) {
        case RxKind::send_ack:
            sim.trace(name(), "in", item.frame, action.stored ? "stored" : "reacked");
            ack_latency_[item.frame.src].add(sim.now() - item.arrived);
            if (uplink_) uplink_->transmit(sim, make_ack(action.target, core_.host_mac(), action.seq), sim.now());
            break;
        case RxKind::send_stop:
            sim.trace(name(), "in", item.frame, "unregistered");
            ++stops_sent_;
            if (uplink_) uplink_->transmit(sim, make_stop(action.target, core_.host_mac()), sim.now());
            break;
        case RxKind::none:
            sim.trace(name(), "in", item.frame, "discarded");
            break;
    }
    if (action.stored && on_stored_) on_stored_(sim, item.frame.src);

    if (backlog_.empty()) busy_ = false;
    else sim.schedule_poll(sim.now() + processing_, id());
}

std::unique_ptr<HostNode> attach_receiver(Simulator& sim, ReceiverCore& core, Nanos per_frame_processing,
                                          std::string name) {
    auto host = std::make_unique<HostNode>(std::move(name), core, per_frame_processing);
    sim.add_node(*host);
    return host;
}

}  // namespace fade
