#include "fade/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <exception>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

namespace fade {

// ------------------------------------------------------------ oracle stream

std::uint8_t OracleStream::next_byte() {
    if (left_ == 0) {
        current_ = rng_.next();
        left_ = 8;
    }
    const auto b = static_cast<std::uint8_t>(current_);
    current_ >>= 8;
    --left_;
    ++position_;
    return b;
}

void OracleStream::fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    const std::size_t n = out.size();
    while (i < n && left_ != 0) out[i++] = next_byte();
    for (; i + 8 <= n; i += 8) {
        std::uint64_t v = rng_.next();
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
        std::memcpy(out.data() + i, &v, 8);
        position_ += 8;
    }
    while (i < n) out[i++] = next_byte();
}

std::uint32_t OracleStream::next_word() {
    std::uint32_t w = 0;
    for (int i = 0; i < 4; ++i) w = (w << 8) | next_byte();
    return w;
}

std::vector<std::uint8_t> oracle_stream(std::uint64_t seed, std::uint64_t length) {
    if (length % 4 != 0) {
        throw ConfigError({"oracle length " + std::to_string(length) + " is not a multiple of 4 (32-bit input words)"});
    }
    std::vector<std::uint8_t> out(length);
    OracleStream(seed).fill(out);
    return out;
}

OracleSource::OracleSource(std::uint64_t seed, const SourceConfig& config)
    : stream_(seed),
      config_(config),
      limit_words_(config.total_bytes ? *config.total_bytes / 4 : std::numeric_limits<std::uint64_t>::max()) {}

std::uint64_t OracleSource::produced_by(Nanos now) const {
    const auto t = static_cast<u128>(std::max<Nanos::rep>(now.count(), 0));
    std::uint64_t words = 0;
    switch (config_.mode) {
        case SourceMode::unlimited:
            return limit_words_;
        case SourceMode::constant_rate:
            // 32 bits per word; rate in bit/s, time in ns.
            words = static_cast<std::uint64_t>(t * config_.rate_bps / 32'000'000'000ull);
            break;
        case SourceMode::burst: {
            const auto bursts = static_cast<std::uint64_t>(t / config_.burst_period.count()) + 1;
            words = bursts * (config_.burst_bytes / 4);
            break;
        }
    }
    return std::min(words, limit_words_);
}

std::size_t OracleSource::available_words(Nanos now) {
    const std::uint64_t avail = produced_by(now) - read_;
    return static_cast<std::size_t>(std::min<std::uint64_t>(avail, 1u << 20));
}

void OracleSource::read_words(std::span<std::uint32_t> out) {
    bytes_.resize(out.size() * 4);
    stream_.fill(bytes_);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t w;
        std::memcpy(&w, bytes_.data() + 4 * i, 4);
        out[i] = std::endian::native == std::endian::little ? __builtin_bswap32(w) : w;
    }
    read_ += out.size();
}

std::optional<Nanos> OracleSource::next_data_time(Nanos now) {
    if (read_ >= limit_words_) return std::nullopt;
    switch (config_.mode) {
        case SourceMode::unlimited:
            return now;
        case SourceMode::constant_rate: {
            // Earliest t with floor(t * rate / 32e9) > read_.
            const auto need = static_cast<u128>(read_ + 1) * 32'000'000'000ull;
            const auto t = (need + config_.rate_bps - 1) / config_.rate_bps;
            return std::max(now, Nanos{static_cast<Nanos::rep>(t)});
        }
        case SourceMode::burst: {
            const auto period = config_.burst_period.count();
            const auto k = now.count() / period + 1;
            return Nanos{k * period};
        }
    }
    return std::nullopt;
}

std::uint64_t m_buf_bound(std::uint64_t rate_bps, Nanos ack_latency) {
    if (ack_latency.count() <= 0) return 0;
    const auto bits = static_cast<u128>(rate_bps) * static_cast<std::uint64_t>(ack_latency.count());
    return static_cast<std::uint64_t>(bits / 8'000'000'000ull);
}

// ---------------------------------------------------------------------- run

namespace {

struct Verifier {
    explicit Verifier(std::uint64_t seed) : expected(seed) {}

    void check(std::span<const std::uint8_t> got) {
        scratch.resize(got.size());
        expected.fill(scratch);
        if (!mismatch_at && std::memcmp(scratch.data(), got.data(), got.size()) != 0) {
            const auto it = std::mismatch(got.begin(), got.end(), scratch.begin());
            mismatch_at = delivered + static_cast<std::uint64_t>(it.first - got.begin());
        }
        delivered += got.size();
    }

    OracleStream expected;
    std::vector<std::uint8_t> scratch;
    std::uint64_t delivered = 0;
    std::optional<std::uint64_t> mismatch_at;
};

class ConsumerNode : public Node {
public:
    ConsumerNode(Nanos period, std::function<void()> drain)
        : Node("consumer"), period_(period), drain_(std::move(drain)) {}

    void on_frame(Simulator&, PortId, Frame) override {}
    void on_poll(Simulator& sim, std::uint64_t) override {
        drain_();
        sim.schedule_poll(sim.now() + period_, id());
    }

private:
    Nanos period_;
    std::function<void()> drain_;
};

LatencySummary summarize(const LatencyStats& s) {
    LatencySummary out;
    out.count = s.count;
    if (s.count == 0) return out;
    out.min_us = static_cast<double>(s.min.count()) / 1e3;
    out.mean_us = static_cast<double>(s.mean().count()) / 1e3;
    out.max_us = static_cast<double>(s.max.count()) / 1e3;
    return out;
}

LinkParams seeded(LinkParams p, std::uint64_t seed) {
    p.seed = seed;
    return p;
}

}  // namespace

RunReport run(const Scenario& sc, const RunOptions& options) {
    sc.validate();
    const std::size_t n = sc.senders.size();
    const Nanos warmup = sc.effective_warmup();

    Simulator sim;
    if (options.trace) sim.set_trace(options.trace);

    ReceiverCore rx(sc.receiver.mac, sc.receiver.max_slaves.value_or(n));
    Switch sw("switch", sc.switch_params);
    Link host_up("host.up", seeded(sc.receiver.link, host_link_seed(sc, 0)));
    Link host_down("host.down", seeded(sc.receiver.link, host_link_seed(sc, 1)));
    auto host = attach_receiver(sim, rx, sc.receiver.per_frame_processing, "host");
    sim.add_node(sw);
    sim.add_node(host_up);
    sim.add_node(host_down);
    host->attach_uplink(host_up);
    host_up.connect(sw, 0);
    host_down.connect(*host, 0);
    sw.learn(sc.receiver.mac, sw.add_port(host_down));

    std::vector<std::unique_ptr<OracleSource>> sources;
    std::vector<std::unique_ptr<Link>> ups, downs;
    std::vector<std::unique_ptr<FebNode>> febs;
    std::vector<Verifier> verifiers;
    std::map<MacAddr, std::size_t> index_of;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cfg = sc.senders[i];
        const std::string name = "feb" + std::to_string(i);
        const std::uint64_t stream_seed = sender_stream_seed(sc.seed, i);
        sources.push_back(std::make_unique<OracleSource>(stream_seed, cfg.source));
        verifiers.emplace_back(stream_seed);
        ups.push_back(std::make_unique<Link>(name + ".up", seeded(cfg.link, sender_link_seed(sc, i, 0))));
        downs.push_back(std::make_unique<Link>(name + ".down", seeded(cfg.link, sender_link_seed(sc, i, 1))));
        febs.push_back(std::make_unique<FebNode>(name, cfg.mac, cfg.nca, *sources.back()));
        auto& feb = *febs.back();
        sim.add_node(feb);
        sim.add_node(*ups.back());
        sim.add_node(*downs.back());
        feb.attach_uplink(*ups.back());
        ups.back()->connect(sw, i + 1);
        downs.back()->connect(feb, 0);
        sw.learn(cfg.mac, sw.add_port(*downs.back()));
        index_of[cfg.mac] = i;
        if (options.step_observer) {
            feb.set_step_observer([&options, i](const SenderCore& core) { options.step_observer(i, core); });
        }
    }

    auto drain = [&](std::size_t i, bool force) {
        const MacAddr& mac = sc.senders[i].mac;
        if (!force && !rx.poll_ready(mac)) return;
        const auto bytes = rx.consume(mac);
        if (!bytes.empty()) verifiers[i].check(bytes);
    };

    std::unique_ptr<ConsumerNode> consumer;
    if (sc.consumer.mode == ConsumerMode::immediate) {
        host->set_store_listener([&](Simulator&, const MacAddr& mac) { drain(index_of.at(mac), false); });
    } else {
        consumer = std::make_unique<ConsumerNode>(sc.consumer.consume_latency, [&] {
            for (std::size_t i = 0; i < n; ++i) drain(i, false);
        });
        sim.add_node(*consumer);
        sim.schedule_poll(sc.consumer.consume_latency, consumer->id());
    }

    std::vector<std::uint64_t> delivered_at_warmup(n, 0);
    sim.set_sample_handler([&](Simulator&, std::uint64_t) {
        for (std::size_t i = 0; i < n; ++i) delivered_at_warmup[i] = verifiers[i].delivered;
    });
    sim.schedule_sample(warmup);

    for (std::size_t i = 0; i < n; ++i) {
        host->start_feb(sim, sc.senders[i].mac, sc.receiver.ring_sets);
        rx.set_wakeup(sc.senders[i].mac, sc.receiver.wakeup_threshold);
    }

    sim.run_until(sc.duration);
    for (std::size_t i = 0; i < n; ++i) drain(i, true);

    RunReport report;
    report.scenario = sc.name;
    report.seed = sc.seed;
    report.duration = sc.duration;
    report.warmup = warmup;
    report.switch_drops = sw.stats().queue_drops;
    report.unknown_dst = sw.stats().unknown_dst;
    report.host_frames = host->frames_handled();
    report.host_max_backlog = host->max_backlog();
    report.events = sim.events_processed();
    report.receiver = rx.metrics();
    report.link_drops = host_up.stats().dropped + host_down.stats().dropped;
    report.integrity = true;

    const double measured_s = static_cast<double>((sc.duration - warmup).count()) / 1e9;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cfg = sc.senders[i];
        const auto& feb = *febs[i];
        const auto& core = feb.core();
        const auto& v = verifiers[i];
        SenderReport s;
        s.mac = cfg.mac.to_string();
        s.bytes_delivered = v.delivered;
        if (cfg.source.total_bytes) s.bytes_expected = *cfg.source.total_bytes / kPayloadBytes * kPayloadBytes;
        s.throughput_bps = static_cast<double>(v.delivered - delivered_at_warmup[i]) * 8.0 / measured_s;
        s.frames_sent = core.transmissions();
        s.frames_resent = core.retransmissions();
        s.resend_ratio = s.frames_sent ? static_cast<double>(s.frames_resent) / static_cast<double>(s.frames_sent) : 0;
        std::uint64_t w_sent = 0, w_resent = 0;
        for (const auto& w : feb.nca_windows()) {
            if (w.at < warmup) continue;
            w_sent += w.sent;
            w_resent += w.resent;
        }
        s.settled_resend_ratio =
            w_sent ? static_cast<double>(w_resent) / static_cast<double>(w_sent) : s.resend_ratio;
        s.final_delay_us = reported_delay_us(core.nca());
        if (auto it = host->ack_latency().find(cfg.mac); it != host->ack_latency().end()) {
            s.ack_latency = summarize(it->second);
        }
        s.rtt = summarize(feb.rtt());
        s.link_drops = ups[i]->stats().dropped + downs[i]->stats().dropped;
        s.m_buf_bytes = m_buf_bound(cfg.link.rate_bps, feb.rtt().mean());
        s.window_limited = s.m_buf_bytes > kSetBytes;
        s.windows = feb.nca_windows();

        if (v.mismatch_at) {
            s.integrity = false;
            s.integrity_detail = "mismatch at byte " + std::to_string(*v.mismatch_at);
        } else if (cfg.source.total_bytes && v.delivered != s.bytes_expected) {
            s.integrity = false;
            s.integrity_detail =
                "delivered " + std::to_string(v.delivered) + " of " + std::to_string(s.bytes_expected) + " bytes";
        } else {
            s.integrity = true;
            s.integrity_detail = cfg.source.total_bytes ? "complete" : "prefix verified";
        }
        report.integrity = report.integrity && s.integrity;
        report.link_drops += s.link_drops;
        report.aggregate_throughput_bps += s.throughput_bps;
        report.senders.push_back(std::move(s));
    }
    return report;
}

// ------------------------------------------------------------------ reports

namespace {

nlohmann::ordered_json latency_json(const LatencySummary& l) {
    return {{"count", l.count}, {"min_us", l.min_us}, {"mean_us", l.mean_us}, {"max_us", l.max_us}};
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["duration_ns"] = r.duration.count();
    j["warmup_ns"] = r.warmup.count();
    j["integrity"] = r.integrity ? "pass" : "fail";
    j["aggregate_throughput_bps"] = r.aggregate_throughput_bps;
    j["switch_drops"] = r.switch_drops;
    j["unknown_dst"] = r.unknown_dst;
    j["link_drops"] = r.link_drops;
    j["host_frames"] = r.host_frames;
    j["host_max_backlog"] = r.host_max_backlog;
    j["events"] = r.events;
    auto senders = nlohmann::ordered_json::array();
    for (const auto& s : r.senders) {
        nlohmann::ordered_json o;
        o["mac"] = s.mac;
        o["integrity"] = s.integrity ? "pass" : "fail";
        o["integrity_detail"] = s.integrity_detail;
        o["bytes_delivered"] = s.bytes_delivered;
        o["bytes_expected"] = s.bytes_expected;
        o["throughput_bps"] = s.throughput_bps;
        o["frames_sent"] = s.frames_sent;
        o["frames_resent"] = s.frames_resent;
        o["resend_ratio"] = s.resend_ratio;
        o["settled_resend_ratio"] = s.settled_resend_ratio;
        o["final_delay_us"] = s.final_delay_us;
        o["nca_windows"] = s.windows.size();
        o["ack_latency"] = latency_json(s.ack_latency);
        o["rtt"] = latency_json(s.rtt);
        o["link_drops"] = s.link_drops;
        o["m_buf_bytes"] = s.m_buf_bytes;
        o["window_limited"] = s.window_limited;
        senders.push_back(std::move(o));
    }
    j["senders"] = std::move(senders);
    j["receiver"] = r.receiver;
    return j;
}

std::string report_text(const RunReport& r) {
    std::ostringstream os;
    os << r.scenario << " seed=" << r.seed << " integrity=" << (r.integrity ? "pass" : "fail")
       << " aggregate=" << fixed(r.aggregate_throughput_bps / 1e6, 2) << " Mb/s switch_drops=" << r.switch_drops
       << " link_drops=" << r.link_drops << "\n";
    for (const auto& s : r.senders) {
        os << "  " << s.mac << " " << fixed(s.throughput_bps / 1e6, 2) << " Mb/s sent=" << s.frames_sent
           << " resent=" << s.frames_resent << " ratio=" << fixed(s.settled_resend_ratio, 4)
           << " delay=" << s.final_delay_us << "us ack_mean=" << fixed(s.ack_latency.mean_us, 1)
           << "us rtt_mean=" << fixed(s.rtt.mean_us, 1) << "us " << (s.integrity ? "pass" : "FAIL") << " ("
           << s.integrity_detail << ")\n";
    }
    return os.str();
}

std::string summary_header() {
    return "label,scenario,seed,integrity,aggregate_throughput_bps,switch_drops,link_drops,"
           "sender_throughput_bps,sender_resend_ratio,sender_final_delay_us";
}

std::string summary_row(const RunReport& r, const std::string& label) {
    auto list = [&](auto field) {
        std::string out;
        for (std::size_t i = 0; i < r.senders.size(); ++i) {
            if (i) out += ';';
            out += field(r.senders[i]);
        }
        return out;
    };
    std::ostringstream os;
    os << label << ',' << r.scenario << ',' << r.seed << ',' << (r.integrity ? "pass" : "fail") << ','
       << fixed(r.aggregate_throughput_bps, 0) << ',' << r.switch_drops << ',' << r.link_drops << ','
       << list([](const SenderReport& s) { return fixed(s.throughput_bps, 0); }) << ','
       << list([](const SenderReport& s) { return fixed(s.settled_resend_ratio, 6); }) << ','
       << list([](const SenderReport& s) { return std::to_string(s.final_delay_us); });
    return os.str();
}

// -------------------------------------------------------------------- sweep

bool SweepResult::all_pass() const {
    return std::all_of(reports.begin(), reports.end(), [](const RunReport& r) { return r.integrity; });
}

SweepResult sweep(const YAML::Node& base, const std::string& parameter, const std::vector<std::string>& values,
                  const std::function<void(Scenario&)>& adjust, unsigned jobs) {
    if (values.empty()) throw ConfigError({"sweep: empty value list for '" + parameter + "'"});

    std::vector<Scenario> scenarios;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < values.size(); ++i) {
        YAML::Node doc = YAML::Clone(base);
        try {
            set_scenario_field(doc, parameter, values[i]);
            Scenario s = parse_scenario(doc);
            if (adjust) adjust(s);
            s.seed += i;
            s.validate();
            scenarios.push_back(std::move(s));
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems()) problems.push_back(parameter + "=" + values[i] + ": " + p);
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));

    SweepResult result;
    result.parameter = parameter;
    result.values = values;
    result.reports.resize(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());

    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(scenarios.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < scenarios.size();) {
            try {
                result.reports[i] = run(scenarios[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return result;
}

}  // namespace fade
