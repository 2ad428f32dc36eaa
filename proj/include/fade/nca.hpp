#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fade {

using Nanos = std::chrono::nanoseconds;

/// Non-negative rational used for thresholds and multipliers, so that
/// delay updates never go through binary floating point.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    bool operator==(const Ratio&) const = default;

    /// Accepts "a/b" or a finite decimal such as "1.25".
    static Ratio parse(std::string_view text);
    std::string to_string() const;
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

bool operator<(const Ratio& a, const Ratio& b);

/// Tuning of the congestion-avoidance controller.
struct NcaParams {
    std::uint32_t n_pkt_update = 3000;
    Ratio t_high{1, 16};
    Ratio t_low{1, 64};
    Ratio alpha_incr{5, 4};
    Ratio alpha_decr{15, 16};
    Nanos initial_delay{200'000};
    Nanos min_delay{1'000};
    Nanos max_delay{10'000'000};

    bool operator==(const NcaParams&) const = default;

    /// N=3000, T_high=1/16, T_low=1/64, alpha 1.25 / 0.9375.
    static NcaParams set1();
    /// N=10000, T_high=1/8, T_low=1/32, alpha 1.25 / 0.75.
    static NcaParams set2();
    static std::optional<NcaParams> preset(std::string_view name);

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

struct NcaState {
    Nanos delay{200'000};
    std::uint32_t c_pkt_sent = 0;
    std::uint32_t c_pkt_rsnt = 0;

    bool operator==(const NcaState&) const = default;

    static NcaState initial(const NcaParams& params);
};

Nanos clamp_delay(const NcaParams& params, Nanos delay);

/// Counts one transmission and, at the end of an update window, rescales
/// the delay from the window's resend ratio and clears both counters.
void record_transmission(NcaState& state, const NcaParams& params, bool is_resend);

constexpr Nanos earliest_next_transmit(const NcaState& state, Nanos last_transmit) {
    return last_transmit + state.delay;
}

/// Delay rounded half-up to whole microseconds, as carried in Data frames.
std::uint32_t reported_delay_us(const NcaState& state);

}  // namespace fade
