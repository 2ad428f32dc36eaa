#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fade/netsim.hpp"

namespace fade {

/// Configuration problems, one "path: message" entry per offending field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

enum class SourceMode { unlimited, constant_rate, burst };
enum class ConsumerMode { immediate, delayed };

struct SourceConfig {
    SourceMode mode = SourceMode::unlimited;
    std::uint64_t rate_bps = 0;          // constant_rate
    std::uint64_t burst_bytes = 0;       // burst
    Nanos burst_period{0};               // burst
    std::optional<std::uint64_t> total_bytes;
};

struct SenderConfig {
    MacAddr mac;
    LinkParams link;
    bool link_seed_set = false;
    SourceConfig source;
    std::string nca_preset = "set1";
    NcaParams nca = NcaParams::set1();
};

struct ReceiverConfig {
    MacAddr mac = MacAddr::parse("02:00:00:00:00:01");
    Nanos per_frame_processing{3'000};
    std::size_t ring_sets = 4;
    std::size_t wakeup_threshold = 0;
    std::optional<std::size_t> max_slaves;
    LinkParams link;
    bool link_seed_set = false;
};

struct ConsumerConfig {
    ConsumerMode mode = ConsumerMode::immediate;
    Nanos consume_latency{0};
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    Nanos duration{1'000'000'000};
    std::optional<Nanos> warmup;
    std::vector<SenderConfig> senders;
    SwitchParams switch_params;
    ReceiverConfig receiver;
    ConsumerConfig consumer;

    /// Explicit warm-up, or 5% of the duration.
    Nanos effective_warmup() const { return warmup ? *warmup : duration / 20; }

    /// Throws ConfigError listing every violated constraint.
    void validate() const;
};

/// Parses "250us", "1ms", "60s", "0"; decimals allowed ("1.5ms").
Nanos parse_duration(std::string_view text);
std::string format_duration(Nanos d);

/// Parses "1000000000", "1e9", "100M", "1G".
std::uint64_t parse_rate(std::string_view text);

Scenario parse_scenario(const YAML::Node& root);
Scenario load_scenario(const std::string& path);
YAML::Node load_scenario_yaml(const std::string& path);

/// Sets the field at a dotted path ("senders.0.link.loss_prob",
/// "senders.*.nca"). Throws ConfigError when the path cannot exist.
void set_scenario_field(YAML::Node& root, std::string_view path, const std::string& value);

/// Seeds for the two directions of sender i's link and of the host link.
std::uint64_t sender_link_seed(const Scenario& s, std::size_t index, int direction);
std::uint64_t host_link_seed(const Scenario& s, int direction);
/// Seed of sender i's data stream.
std::uint64_t sender_stream_seed(std::uint64_t scenario_seed, std::size_t index);

}  // namespace fade
