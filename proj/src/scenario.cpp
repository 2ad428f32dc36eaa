#include "fade/scenario.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fade {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = "invalid scenario";
    for (const auto& p : problems) out += "\n  " + p;
    return out;
}

double parse_number(std::string_view text) {
    std::string s(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::uint64_t parse_count(std::string_view text) {
    const double v = parse_number(text);
    if (v < 0 || v != std::floor(v) || v > 1.8e19) {
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return static_cast<std::uint64_t>(v);
}

// Collects problems while walking the YAML tree so that one validation
// pass reports every bad field.
class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& msg) { problems.push_back(path + ": " + msg); }

    bool expect_map(const YAML::Node& n, const std::string& path) {
        if (n.IsMap()) return true;
        fail(path, "expected a mapping");
        return false;
    }

    void allow_keys(const YAML::Node& n, const std::string& path, std::initializer_list<std::string_view> keys) {
        const std::set<std::string_view> allowed(keys);
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
        }
    }

    template <typename T, typename Parse>
    void field(const YAML::Node& parent, const std::string& path, const char* key, T& out, Parse parse) {
        const YAML::Node n = parent[key];
        if (!n) return;
        const std::string p = path.empty() ? key : path + "." + key;
        if (!n.IsScalar()) {
            fail(p, "expected a scalar");
            return;
        }
        try {
            out = parse(n.Scalar());
        } catch (const std::exception& e) {
            fail(p, e.what());
        }
    }

    template <typename T, typename Parse>
    void field(const YAML::Node& parent, const std::string& path, const char* key, std::optional<T>& out,
               Parse parse) {
        T value{};
        const std::size_t before = problems.size();
        if (!parent[key]) return;
        field(parent, path, key, value, parse);
        if (problems.size() == before) out = value;
    }
};

const auto as_duration = [](const std::string& s) { return parse_duration(s); };
const auto as_rate = [](const std::string& s) { return parse_rate(s); };
const auto as_count = [](const std::string& s) { return parse_count(s); };
const auto as_size = [](const std::string& s) { return static_cast<std::size_t>(parse_count(s)); };
const auto as_prob = [](const std::string& s) { return parse_number(s); };
const auto as_mac = [](const std::string& s) { return MacAddr::parse(s); };
const auto as_ratio = [](const std::string& s) { return Ratio::parse(s); };
const auto as_string = [](const std::string& s) { return s; };

void read_link(Reader& r, const YAML::Node& n, const std::string& path, LinkParams& link, bool& seed_set) {
    if (!n) return;
    if (!r.expect_map(n, path)) return;
    r.allow_keys(n, path, {"rate_bps", "propagation", "loss_prob", "dup_prob", "reorder_jitter", "seed"});
    r.field(n, path, "rate_bps", link.rate_bps, as_rate);
    r.field(n, path, "propagation", link.propagation, as_duration);
    r.field(n, path, "loss_prob", link.loss_prob, as_prob);
    r.field(n, path, "dup_prob", link.dup_prob, as_prob);
    r.field(n, path, "reorder_jitter", link.reorder_jitter, as_duration);
    if (n["seed"]) {
        seed_set = true;
        r.field(n, path, "seed", link.seed, as_count);
    }
}

void read_nca(Reader& r, const YAML::Node& n, const std::string& path, SenderConfig& s) {
    if (!n) return;
    auto apply_preset = [&](const std::string& name) {
        if (auto p = NcaParams::preset(name)) {
            s.nca = *p;
            s.nca_preset = name;
        } else {
            r.fail(path, "unknown preset '" + name + "' (expected set1 or set2)");
        }
    };
    if (n.IsScalar()) {
        apply_preset(n.Scalar());
        return;
    }
    if (!r.expect_map(n, path)) return;
    r.allow_keys(n, path,
                 {"preset", "n_pkt_update", "t_high", "t_low", "alpha_incr", "alpha_decr", "initial_delay", "min_delay",
                  "max_delay"});
    if (n["preset"]) {
        if (n["preset"].IsScalar()) apply_preset(n["preset"].Scalar());
        else r.fail(path + ".preset", "expected a scalar");
    }
    bool custom = false;
    for (const char* key : {"n_pkt_update", "t_high", "t_low", "alpha_incr", "alpha_decr", "initial_delay",
                            "min_delay", "max_delay"}) {
        custom = custom || static_cast<bool>(n[key]);
    }
    std::uint64_t n_update = s.nca.n_pkt_update;
    r.field(n, path, "n_pkt_update", n_update, as_count);
    s.nca.n_pkt_update = static_cast<std::uint32_t>(n_update);
    r.field(n, path, "t_high", s.nca.t_high, as_ratio);
    r.field(n, path, "t_low", s.nca.t_low, as_ratio);
    r.field(n, path, "alpha_incr", s.nca.alpha_incr, as_ratio);
    r.field(n, path, "alpha_decr", s.nca.alpha_decr, as_ratio);
    r.field(n, path, "initial_delay", s.nca.initial_delay, as_duration);
    r.field(n, path, "min_delay", s.nca.min_delay, as_duration);
    r.field(n, path, "max_delay", s.nca.max_delay, as_duration);
    if (custom) s.nca_preset = s.nca_preset + "+custom";
}

void read_source(Reader& r, const YAML::Node& n, const std::string& path, SourceConfig& src) {
    if (!n) return;
    if (!r.expect_map(n, path)) return;
    r.allow_keys(n, path, {"mode", "rate_bps", "burst_bytes", "burst_period", "total_bytes"});
    std::string mode = "unlimited";
    r.field(n, path, "mode", mode, as_string);
    if (mode == "unlimited") src.mode = SourceMode::unlimited;
    else if (mode == "constant-rate") src.mode = SourceMode::constant_rate;
    else if (mode == "burst") src.mode = SourceMode::burst;
    else r.fail(path + ".mode", "expected unlimited, constant-rate or burst");
    r.field(n, path, "rate_bps", src.rate_bps, as_rate);
    r.field(n, path, "burst_bytes", src.burst_bytes, as_count);
    r.field(n, path, "burst_period", src.burst_period, as_duration);
    r.field(n, path, "total_bytes", src.total_bytes, as_count);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

Nanos parse_duration(std::string_view text) {
    std::size_t split = text.size();
    while (split > 0 && std::isalpha(static_cast<unsigned char>(text[split - 1]))) --split;
    const std::string_view unit = text.substr(split);
    const double value = parse_number(text.substr(0, split));
    double scale = 0;
    if (unit == "ns") scale = 1;
    else if (unit == "us") scale = 1e3;
    else if (unit == "ms") scale = 1e6;
    else if (unit == "s") scale = 1e9;
    else if (unit.empty() && value == 0) scale = 1;
    else throw std::invalid_argument("duration needs a unit (ns, us, ms, s): '" + std::string(text) + "'");
    if (value < 0) throw std::invalid_argument("duration must be non-negative");
    return Nanos{static_cast<Nanos::rep>(std::llround(value * scale))};
}

std::string format_duration(Nanos d) { return std::to_string(d.count()) + "ns"; }

std::uint64_t parse_rate(std::string_view text) {
    double scale = 1;
    if (!text.empty()) {
        switch (text.back()) {
            case 'k': scale = 1e3; break;
            case 'M': scale = 1e6; break;
            case 'G': scale = 1e9; break;
            default: break;
        }
        if (scale != 1) text.remove_suffix(1);
    }
    const double v = parse_number(text) * scale;
    if (v <= 0 || v != std::floor(v)) throw std::invalid_argument("rate must be a positive whole number of bit/s");
    return static_cast<std::uint64_t>(v);
}

Scenario parse_scenario(const YAML::Node& root) {
    Reader r;
    Scenario s;
    if (!root || !root.IsMap()) throw ConfigError({"<root>: expected a mapping"});
    r.allow_keys(root, "", {"name", "seed", "duration", "warmup", "switch", "receiver", "consumer", "senders"});
    r.field(root, "", "name", s.name, as_string);
    r.field(root, "", "seed", s.seed, as_count);
    r.field(root, "", "duration", s.duration, as_duration);
    r.field(root, "", "warmup", s.warmup, as_duration);

    if (const auto sw = root["switch"]; sw && r.expect_map(sw, "switch")) {
        r.allow_keys(sw, "switch", {"egress_queue_frames"});
        r.field(sw, "switch", "egress_queue_frames", s.switch_params.egress_queue_frames, as_size);
    }
    if (const auto rx = root["receiver"]; rx && r.expect_map(rx, "receiver")) {
        r.allow_keys(rx, "receiver",
                     {"mac", "per_frame_processing", "ring_sets", "wakeup_threshold", "max_slaves", "link"});
        r.field(rx, "receiver", "mac", s.receiver.mac, as_mac);
        r.field(rx, "receiver", "per_frame_processing", s.receiver.per_frame_processing, as_duration);
        r.field(rx, "receiver", "ring_sets", s.receiver.ring_sets, as_size);
        r.field(rx, "receiver", "wakeup_threshold", s.receiver.wakeup_threshold, as_size);
        r.field(rx, "receiver", "max_slaves", s.receiver.max_slaves, as_size);
        read_link(r, rx["link"], "receiver.link", s.receiver.link, s.receiver.link_seed_set);
    }
    if (const auto c = root["consumer"]; c && r.expect_map(c, "consumer")) {
        r.allow_keys(c, "consumer", {"mode", "consume_latency"});
        std::string mode = "immediate";
        r.field(c, "consumer", "mode", mode, as_string);
        if (mode == "immediate") s.consumer.mode = ConsumerMode::immediate;
        else if (mode == "delayed") s.consumer.mode = ConsumerMode::delayed;
        else r.fail("consumer.mode", "expected immediate or delayed");
        r.field(c, "consumer", "consume_latency", s.consumer.consume_latency, as_duration);
    }
    const auto senders = root["senders"];
    if (senders && !senders.IsSequence()) {
        r.fail("senders", "expected a list");
    } else if (senders) {
        for (std::size_t i = 0; i < senders.size(); ++i) {
            const std::string path = "senders." + std::to_string(i);
            const auto n = senders[i];
            if (!r.expect_map(n, path)) continue;
            r.allow_keys(n, path, {"mac", "link", "source", "nca"});
            SenderConfig sc;
            if (!n["mac"]) r.fail(path + ".mac", "required");
            r.field(n, path, "mac", sc.mac, as_mac);
            read_link(r, n["link"], path + ".link", sc.link, sc.link_seed_set);
            read_source(r, n["source"], path + ".source", sc.source);
            read_nca(r, n["nca"], path + ".nca", sc);
            s.senders.push_back(std::move(sc));
        }
    }
    if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
    s.validate();
    return s;
}

void Scenario::validate() const {
    std::vector<std::string> p;
    if (duration.count() <= 0) p.push_back("duration: must be positive");
    if (warmup && *warmup >= duration) p.push_back("warmup: must be shorter than duration");
    if (senders.empty()) p.push_back("senders: at least one sender is required");
    if (switch_params.egress_queue_frames < 1) p.push_back("switch.egress_queue_frames: must be at least 1");
    if (receiver.ring_sets < 2) p.push_back("receiver.ring_sets: must be at least 2");
    if (receiver.wakeup_threshold > receiver.ring_sets * kSetBytes) {
        p.push_back("receiver.wakeup_threshold: larger than the ring");
    }
    if (receiver.per_frame_processing.count() < 0) p.push_back("receiver.per_frame_processing: must be non-negative");
    if (receiver.max_slaves && *receiver.max_slaves < senders.size()) {
        p.push_back("receiver.max_slaves: fewer slots than senders");
    }
    if (consumer.mode == ConsumerMode::delayed && consumer.consume_latency.count() <= 0) {
        p.push_back("consumer.consume_latency: delayed mode needs a positive latency");
    }
    auto check_link = [&](const LinkParams& l, const std::string& path) {
        try {
            l.validate();
        } catch (const std::exception& e) {
            p.push_back(path + ": " + e.what());
        }
    };
    check_link(receiver.link, "receiver.link");
    std::set<MacAddr> macs{receiver.mac};
    for (std::size_t i = 0; i < senders.size(); ++i) {
        const auto& s = senders[i];
        const std::string path = "senders." + std::to_string(i);
        if (!macs.insert(s.mac).second) p.push_back(path + ".mac: duplicate MAC " + s.mac.to_string());
        check_link(s.link, path + ".link");
        try {
            s.nca.validate();
        } catch (const std::exception& e) {
            p.push_back(path + ".nca: " + e.what());
        }
        const auto& src = s.source;
        if (src.total_bytes && *src.total_bytes % 4 != 0) {
            p.push_back(path + ".source.total_bytes: must be a multiple of 4 (32-bit input words)");
        }
        if (src.mode == SourceMode::constant_rate && src.rate_bps == 0) {
            p.push_back(path + ".source.rate_bps: constant-rate source needs a rate");
        }
        if (src.mode == SourceMode::burst) {
            if (src.burst_bytes == 0 || src.burst_bytes % 4 != 0) {
                p.push_back(path + ".source.burst_bytes: must be a positive multiple of 4");
            }
            if (src.burst_period.count() <= 0) p.push_back(path + ".source.burst_period: must be positive");
        }
    }
    if (!p.empty()) throw ConfigError(std::move(p));
}

YAML::Node load_scenario_yaml(const std::string& path) {
    try {
        return YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ConfigError({path + ": " + e.what()});
    }
}

Scenario load_scenario(const std::string& path) { return parse_scenario(load_scenario_yaml(path)); }

void set_scenario_field(YAML::Node& root, std::string_view path, const std::string& value) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    for (const auto& part : parts) {
        if (part.empty()) throw ConfigError({std::string(path) + ": empty path segment"});
    }

    std::function<void(YAML::Node, std::size_t)> assign = [&](YAML::Node node, std::size_t i) {
        const std::string& key = parts[i];
        const bool last = i + 1 == parts.size();
        if (node.IsSequence()) {
            if (key == "*") {
                for (std::size_t k = 0; k < node.size(); ++k) {
                    if (last) node[k] = value;
                    else assign(node[k], i + 1);
                }
                return;
            }
            std::size_t idx = 0;
            auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
            if (ec != std::errc{} || ptr != key.data() + key.size() || idx >= node.size()) {
                throw ConfigError({std::string(path) + ": no list element '" + key + "'"});
            }
            if (last) node[idx] = value;
            else assign(node[idx], i + 1);
            return;
        }
        if (node.IsScalar()) {
            throw ConfigError({std::string(path) + ": '" + parts[i - 1] + "' is not a section"});
        }
        if (last) {
            node[key] = value;
            return;
        }
        YAML::Node child = node[key];
        if (!child || child.IsNull()) {
            node[key] = YAML::Node(YAML::NodeType::Map);
        }
        assign(node[key], i + 1);
    };
    assign(root, 0);
}

std::uint64_t sender_link_seed(const Scenario& s, std::size_t index, int direction) {
    const auto& sc = s.senders.at(index);
    const std::uint64_t base = sc.link_seed_set ? sc.link.seed : mix_seed(s.seed, 0x100 + index);
    return mix_seed(base, static_cast<std::uint64_t>(direction));
}

std::uint64_t host_link_seed(const Scenario& s, int direction) {
    const std::uint64_t base = s.receiver.link_seed_set ? s.receiver.link.seed : mix_seed(s.seed, 0xFF);
    return mix_seed(base, static_cast<std::uint64_t>(direction));
}

std::uint64_t sender_stream_seed(std::uint64_t scenario_seed, std::size_t index) {
    return mix_seed(scenario_seed, 0x5EED0000ull + index);
}

}  // namespace fade
