#include "fade/nca.hpp"
#include "fade/rng.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fade {

namespace {

std::uint64_t parse_u64(std::string_view s, std::string_view whole) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
        throw std::invalid_argument("bad ratio: " + std::string(whole));
    }
    return v;
}

Ratio reduced(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::invalid_argument("ratio with zero denominator");
    const std::uint64_t g = std::gcd(num, den);
    return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
}

// Integer floor(value * r), saturating at the int64 range.
std::int64_t scale(std::int64_t value, const Ratio& r) {
    const u128 prod = static_cast<u128>(value) * r.num / r.den;
    constexpr auto cap = static_cast<u128>(std::numeric_limits<std::int64_t>::max());
    return static_cast<std::int64_t>(prod > cap ? cap : prod);
}

}  // namespace

Ratio Ratio::parse(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        return reduced(parse_u64(text.substr(0, slash), text), parse_u64(text.substr(slash + 1), text));
    }
    auto dot = text.find('.');
    if (dot == std::string_view::npos) return Ratio{parse_u64(text, text), 1};
    const auto int_part = text.substr(0, dot);
    const auto frac_part = text.substr(dot + 1);
    if (frac_part.size() > 18) throw std::invalid_argument("bad ratio: " + std::string(text));
    std::uint64_t den = 1;
    for (std::size_t i = 0; i < frac_part.size(); ++i) den *= 10;
    const std::uint64_t whole = int_part.empty() ? 0 : parse_u64(int_part, text);
    const std::uint64_t frac = frac_part.empty() ? 0 : parse_u64(frac_part, text);
    return reduced(whole * den + frac, den);
}

std::string Ratio::to_string() const { return std::to_string(num) + "/" + std::to_string(den); }

bool operator<(const Ratio& a, const Ratio& b) {
    return static_cast<u128>(a.num) * b.den < static_cast<u128>(b.num) * a.den;
}

NcaParams NcaParams::set1() { return NcaParams{}; }

NcaParams NcaParams::set2() {
    NcaParams p;
    p.n_pkt_update = 10000;
    p.t_high = {1, 8};
    p.t_low = {1, 32};
    p.alpha_incr = {5, 4};
    p.alpha_decr = {3, 4};
    return p;
}

std::optional<NcaParams> NcaParams::preset(std::string_view name) {
    if (name == "set1") return set1();
    if (name == "set2") return set2();
    return std::nullopt;
}

void NcaParams::validate() const {
    if (n_pkt_update == 0) throw std::invalid_argument("n_pkt_update must be positive");
    if (t_high.den == 0 || t_low.den == 0 || alpha_incr.den == 0 || alpha_decr.den == 0) {
        throw std::invalid_argument("zero denominator");
    }
    if (!(t_low < t_high)) throw std::invalid_argument("t_low must be below t_high");
    const Ratio one{1, 1};
    if (!(one < alpha_incr)) throw std::invalid_argument("alpha_incr must exceed 1");
    if (!(alpha_decr < one) || alpha_decr.num == 0) throw std::invalid_argument("alpha_decr must lie in (0, 1)");
    if (min_delay.count() <= 0) throw std::invalid_argument("min_delay must be positive");
    if (!(min_delay <= initial_delay && initial_delay <= max_delay)) {
        throw std::invalid_argument("need min_delay <= initial_delay <= max_delay");
    }
}

NcaState NcaState::initial(const NcaParams& params) { return NcaState{params.initial_delay, 0, 0}; }

Nanos clamp_delay(const NcaParams& params, Nanos delay) { return std::clamp(delay, params.min_delay, params.max_delay); }

void record_transmission(NcaState& state, const NcaParams& params, bool is_resend) {
    ++state.c_pkt_sent;
    if (is_resend) ++state.c_pkt_rsnt;
    if (state.c_pkt_sent < params.n_pkt_update) return;

    // rsnt/sent > num/den  <=>  rsnt*den > sent*num
    const u128 rsnt = state.c_pkt_rsnt;
    const u128 sent = state.c_pkt_sent;
    if (rsnt * params.t_high.den > sent * params.t_high.num) {
        state.delay = clamp_delay(params, Nanos{scale(state.delay.count(), params.alpha_incr)});
    } else if (rsnt * params.t_low.den < sent * params.t_low.num) {
        state.delay = clamp_delay(params, Nanos{scale(state.delay.count(), params.alpha_decr)});
    }
    state.c_pkt_sent = 0;
    state.c_pkt_rsnt = 0;
}

std::uint32_t reported_delay_us(const NcaState& state) {
    const auto us = (state.delay.count() + 500) / 1000;
    return static_cast<std::uint32_t>(std::min<std::int64_t>(us, std::numeric_limits<std::uint32_t>::max()));
}

}  // namespace fade
