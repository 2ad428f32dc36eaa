#include <gtest/gtest.h>

#include "fade/rng.hpp"
#include "fade/wire.hpp"
#include "test_util.hpp"

using namespace fade;

namespace {

const MacAddr kHost = MacAddr::parse("02:00:00:00:00:01");
const MacAddr kFeb = MacAddr::parse("02:00:00:00:00:10");

std::vector<std::uint8_t> golden_payload() {
    std::vector<std::uint8_t> p(kPayloadBytes);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<std::uint8_t>((i * 7 + 3) & 0xFF);
    return p;
}

WireErrc decode_error(std::span<const std::uint8_t> bytes) {
    try {
        (void)decode(bytes);
    } catch (const WireError& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode did not throw";
    return WireErrc::invalid_field;
}

}  // namespace

TEST(MacAddr, ParseAndFormat) {
    const auto m = MacAddr::parse("02:AB:cd:00:00:10");
    EXPECT_EQ(m.to_string(), "02:ab:cd:00:00:10");
    EXPECT_EQ(MacAddr::parse("02-ab-cd-00-00-10"), m);
    EXPECT_THROW(MacAddr::parse("02:ab:cd:00:00"), WireError);
    EXPECT_THROW(MacAddr::parse("02:ab:cd:00:00:1g"), WireError);
}

TEST(SeqNum, PackExamples) {
    EXPECT_EQ(pack_seq({0, 0, 0}), 0x00000000u);
    EXPECT_EQ(pack_seq({1, 0, 31}), 0x0001001Fu);
    EXPECT_EQ(pack_seq({0xFFFF, 0, 5}), 0xFFFF0005u);
    EXPECT_EQ(pack_seq({0, 1023, 0}), 1023u << 6);
}

TEST(SeqNum, PackRejectsOversizedFields) {
    try {
        pack_seq({0, 0, 64});
        FAIL();
    } catch (const WireError& e) {
        EXPECT_EQ(e.code(), WireErrc::invalid_field);
    }
    EXPECT_THROW(pack_seq({0, 1024, 0}), WireError);
}

TEST(SeqNum, UnpackExamples) {
    EXPECT_EQ(unpack_seq(0x00000000), (SeqNum{0, 0, 0}));
    EXPECT_EQ(unpack_seq(0x0001001F), (SeqNum{1, 0, 31}));
    try {
        unpack_seq(0x00000020);
        FAIL();
    } catch (const WireError& e) {
        EXPECT_EQ(e.code(), WireErrc::out_of_range);
    }
}

TEST(SeqNum, PackUnpackInverse) {
    SplitMix64 rng(42);
    for (int i = 0; i < 10000; ++i) {
        const SeqNum s{static_cast<std::uint16_t>(rng.below(65536)), static_cast<std::uint16_t>(rng.below(1024)),
                       static_cast<std::uint8_t>(rng.below(32))};
        EXPECT_EQ(unpack_seq(pack_seq(s)), s);
    }
}

TEST(Encode, StartLayout) {
    const auto bytes = encode(make_start(kFeb, kHost));
    ASSERT_EQ(bytes.size(), 64u);
    EXPECT_EQ(bytes[12], 0xFA);
    EXPECT_EQ(bytes[13], 0xDE);
    EXPECT_EQ(bytes[14], 0x00);
    EXPECT_EQ(bytes[15], 0x01);
    for (std::size_t i = 16; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0) << i;
}

TEST(Encode, AckLayout) {
    const auto bytes = encode(make_ack(kFeb, kHost, {2, 0, 7}));
    ASSERT_EQ(bytes.size(), 64u);
    const std::vector<std::uint8_t> expect{0xFA, 0xDE, 0x00, 0x03, 0x00, 0x02, 0x00, 0x07};
    EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin() + 12, bytes.begin() + 20), expect);
}

TEST(Encode, DataLength) {
    const auto bytes = encode(make_data(kHost, kFeb, {0, 0, 0}, 200, golden_payload()));
    EXPECT_EQ(bytes.size(), 14u + 2 + 4 + 4 + 1024);
    EXPECT_EQ(bytes.size(), kDataFrameBytes);
}

TEST(Encode, DataNeedsFullPayload) {
    std::vector<std::uint8_t> short_payload(100);
    EXPECT_THROW(make_data(kHost, kFeb, {0, 0, 0}, 0, short_payload), WireError);
}

TEST(Golden, MatchesStoredDumps) {
    struct Case {
        const char* file;
        Frame frame;
    };
    const Case cases[] = {
        {"start.hex", make_start(kFeb, kHost)},
        {"stop.hex", make_stop(kFeb, kHost)},
        {"ack.hex", make_ack(kFeb, kHost, {2, 0, 7})},
        {"data.hex", make_data(kHost, kFeb, {0x1234, 0, 17}, 200, golden_payload())},
    };
    for (const auto& c : cases) {
        const auto golden = test::read_hex(test::source_path(std::string("tests/golden/") + c.file));
        EXPECT_EQ(encode(c.frame), golden) << c.file;
        EXPECT_EQ(decode(golden), c.frame) << c.file;
    }
}

TEST(Decode, ShortInputIsMalformed) {
    std::vector<std::uint8_t> bytes(63, 0);
    EXPECT_EQ(decode_error(bytes), WireErrc::malformed);
}

TEST(Decode, UnknownTypeWord) {
    auto bytes = encode(make_start(kFeb, kHost));
    bytes[15] = 0x02;
    EXPECT_EQ(decode_error(bytes), WireErrc::unknown_type);
}

TEST(Decode, OtherEtherTypeIsNotOurs) {
    auto bytes = encode(make_start(kFeb, kHost));
    bytes[12] = 0x08;
    bytes[13] = 0x00;
    EXPECT_FALSE(decode(bytes).has_value());
}

TEST(Decode, DataWithWrongLength) {
    auto bytes = encode(make_data(kHost, kFeb, {1, 0, 1}, 5, golden_payload()));
    bytes.pop_back();
    EXPECT_EQ(decode_error(bytes), WireErrc::malformed);
    bytes.resize(64);
    EXPECT_EQ(decode_error(bytes), WireErrc::malformed);
}

TEST(Decode, ControlFrameWithWrongLength) {
    auto bytes = encode(make_ack(kFeb, kHost, {0, 0, 1}));
    bytes.push_back(0);
    EXPECT_EQ(decode_error(bytes), WireErrc::malformed);
}

TEST(Decode, RoundTripRandomFrames) {
    SplitMix64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
        MacAddr a, b;
        for (auto& o : a.octets) o = static_cast<std::uint8_t>(rng.next());
        for (auto& o : b.octets) o = static_cast<std::uint8_t>(rng.next());
        const SeqNum seq{static_cast<std::uint16_t>(rng.next()), static_cast<std::uint16_t>(rng.below(1024)),
                         static_cast<std::uint8_t>(rng.below(32))};
        Frame f;
        switch (rng.below(4)) {
            case 0: f = make_start(a, b); break;
            case 1: f = make_stop(a, b); break;
            case 2: f = make_ack(a, b, seq); break;
            default: {
                std::vector<std::uint8_t> p(kPayloadBytes);
                for (auto& x : p) x = static_cast<std::uint8_t>(rng.next());
                f = make_data(a, b, seq, static_cast<std::uint32_t>(rng.next()), p);
            }
        }
        const auto bytes = encode(f);
        EXPECT_EQ(bytes.size(), f.wire_size());
        const auto back = decode(bytes);
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, f);
    }
}

TEST(SetDistance, Examples) {
    EXPECT_EQ(set_distance(5, 5), 0);
    EXPECT_EQ(set_distance(0xFFFF, 0x0000), 1);
    EXPECT_EQ(set_distance(0x0000, 0xFFFF), -1);
    EXPECT_EQ(set_distance(0, 0x8000), -32768);
}

TEST(SetDistance, Antisymmetric) {
    SplitMix64 rng(9);
    for (int i = 0; i < 10000; ++i) {
        const auto a = static_cast<std::uint16_t>(rng.next());
        const auto b = static_cast<std::uint16_t>(rng.next());
        const int d = set_distance(a, b);
        if (d == -32768) continue;
        EXPECT_EQ(d, -set_distance(b, a));
    }
}
