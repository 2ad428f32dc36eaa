#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "fade/netsim.hpp"
#include "fade/rng.hpp"
#include "fade/scenario.hpp"

namespace fade {

/// Deterministic byte stream shared by a board's data source and the
/// consumer that verifies it. Bytes come from successive SplitMix64 outputs,
/// least significant byte first.
class OracleStream {
public:
    explicit OracleStream(std::uint64_t seed) : rng_(seed) {}

    void fill(std::span<std::uint8_t> out);
    /// Next four bytes as a big-endian word, the order the board writes them.
    std::uint32_t next_word();
    std::uint64_t position() const noexcept { return position_; }

private:
    std::uint8_t next_byte();

    SplitMix64 rng_;
    std::uint64_t current_ = 0;
    unsigned left_ = 0;
    std::uint64_t position_ = 0;
};

/// The first `length` bytes of the stream. length must be a multiple of 4.
std::vector<std::uint8_t> oracle_stream(std::uint64_t seed, std::uint64_t length);

/// DataSource producing the oracle stream at the configured pace.
class OracleSource : public DataSource {
public:
    OracleSource(std::uint64_t seed, const SourceConfig& config);

    std::size_t available_words(Nanos now) override;
    void read_words(std::span<std::uint32_t> out) override;
    std::optional<Nanos> next_data_time(Nanos now) override;

    std::uint64_t words_read() const noexcept { return read_; }

private:
    std::uint64_t produced_by(Nanos now) const;

    OracleStream stream_;
    SourceConfig config_;
    std::uint64_t limit_words_;
    std::uint64_t read_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// Largest amount of unconfirmed data a sender needs to keep the link busy:
/// rate times acknowledgement latency, in bytes (rounded down).
std::uint64_t m_buf_bound(std::uint64_t rate_bps, Nanos ack_latency);

struct LatencySummary {
    std::uint64_t count = 0;
    double min_us = 0;
    double mean_us = 0;
    double max_us = 0;
};

struct SenderReport {
    std::string mac;
    std::uint64_t bytes_delivered = 0;
    std::uint64_t bytes_expected = 0;  // 0 for endless sources
    double throughput_bps = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_resent = 0;
    double resend_ratio = 0;
    /// Resend ratio over the NCA windows closed after warm-up.
    double settled_resend_ratio = 0;
    std::uint32_t final_delay_us = 0;
    LatencySummary ack_latency;
    LatencySummary rtt;
    std::uint64_t link_drops = 0;
    std::uint64_t m_buf_bytes = 0;
    bool window_limited = false;
    bool integrity = false;
    std::string integrity_detail;
    /// Full NCA history; not serialized.
    std::vector<NcaWindowRecord> windows;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    Nanos duration{0};
    Nanos warmup{0};
    std::vector<SenderReport> senders;
    double aggregate_throughput_bps = 0;
    std::uint64_t switch_drops = 0;
    std::uint64_t unknown_dst = 0;
    std::uint64_t link_drops = 0;
    std::uint64_t host_frames = 0;
    std::uint64_t host_max_backlog = 0;
    std::uint64_t events = 0;
    std::map<std::string, std::int64_t> receiver;
    bool integrity = false;
};

struct RunOptions {
    std::ostream* trace = nullptr;
    /// Called after every sender step with the sender index.
    std::function<void(std::size_t, const SenderCore&)> step_observer;
};

RunReport run(const Scenario& scenario, const RunOptions& options = {});

nlohmann::ordered_json to_json(const RunReport& report);
std::string report_text(const RunReport& report);

std::string summary_header();
std::string summary_row(const RunReport& report, const std::string& label = "");

struct SweepResult {
    std::string parameter;
    std::vector<std::string> values;
    std::vector<RunReport> reports;
    bool all_pass() const;
};

/// Runs one scenario per value with `parameter` set to it. Run i uses seed
/// base_seed + i. Every value is parsed before anything runs, so a bad value
/// raises ConfigError without partial output.
SweepResult sweep(const YAML::Node& base, const std::string& parameter, const std::vector<std::string>& values,
                  const std::function<void(Scenario&)>& adjust = {}, unsigned jobs = 0);

}  // namespace fade
