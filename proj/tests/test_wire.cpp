#include <doctest.h>

#include <cmath>

#include "cafl/rng.hpp"
#include "cafl/wire.hpp"

using namespace cafl;

namespace {

UpdateDelta zero_delta(const ModelConfig& cfg, int k) {
    const ModelParams shape = zero_params(cfg);
    UpdateDelta d;
    d.k = k;
    for (int i = 0; i < shape.tensor_count(); ++i) {
        d.tensors.push_back(shape.tensor(i));
    }
    return d;
}

UpdateDelta random_delta(const ModelConfig& cfg, int k, double magnitude, Rng& rng) {
    UpdateDelta d = zero_delta(cfg, k);
    for (int i = 0; i < int(d.tensors.size()); ++i) {
        if (!tensor_unfrozen(i, cfg.n_blocks, k)) continue;
        for (double& v : d.tensors[size_t(i)].a) {
            v = rng.next_symmetric(magnitude);
        }
    }
    return d;
}

}  // namespace

TEST_CASE("wire: zero delta decodes to exact zeros at every level") {
    ModelConfig cfg{5, 4, 4, 2, 3};
    for (int q = 0; q <= 2; ++q) {
        const UpdateDelta out = codec_roundtrip(zero_delta(cfg, 2), q, cfg);
        for (const Tensor& t : out.tensors) {
            for (double v : t.a) CHECK(v == 0.0);
        }
    }
}

TEST_CASE("wire: 8-bit worked example") {
    ModelConfig cfg{2, 1, 1, 1, 1};
    UpdateDelta d = zero_delta(cfg, 1);
    Tensor& head_w = d.tensors[3];  // hidden x vocab = 1 x 2
    REQUIRE(head_w.count() == 2);
    head_w.a = {1.0, -0.5};

    const UpdateDelta out = codec_roundtrip(d, 1, cfg);
    const Tensor& rt = out.tensors[3];
    CHECK(rt.a[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rt.a[1] == doctest::Approx(-64.0 / 127.0).epsilon(1e-6));  // code -64, scale 1/127
    CHECK(std::abs(rt.a[0] - 1.0) <= 1.0 / 254.0);
    CHECK(std::abs(rt.a[1] - -0.5) <= 1.0 / 254.0);
}

TEST_CASE("wire: 2-bit worked example") {
    ModelConfig cfg{2, 1, 1, 1, 1};
    UpdateDelta d = zero_delta(cfg, 1);
    d.tensors[3].a = {0.9, -0.1};

    const UpdateDelta out = codec_roundtrip(d, 2, cfg);
    CHECK(out.tensors[3].a[0] == doctest::Approx(0.9).epsilon(1e-6));   // level +max
    CHECK(out.tensors[3].a[1] == doctest::Approx(-0.3).epsilon(1e-6));  // level -max/3
}

TEST_CASE("wire: quantizer error bounds over random tensors") {
    ModelConfig cfg{9, 6, 6, 2, 3};
    Rng rng(808);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 1 + int(rng.next_index(size_t(cfg.n_blocks)));
        const double magnitude = std::pow(10.0, -3.0 + 6.0 * rng.next_double());
        const UpdateDelta d = random_delta(cfg, k, magnitude, rng);

        const UpdateDelta q0 = codec_roundtrip(d, 0, cfg);
        const UpdateDelta q1 = codec_roundtrip(d, 1, cfg);
        const UpdateDelta q2 = codec_roundtrip(d, 2, cfg);
        for (int ti = 0; ti < int(d.tensors.size()); ++ti) {
            const Tensor& t = d.tensors[size_t(ti)];
            double max_abs = 0.0;
            for (double v : t.a) max_abs = std::max(max_abs, std::abs(v));
            for (size_t e = 0; e < t.a.size(); ++e) {
                CHECK(q0.tensors[size_t(ti)].a[e] == double(float(t.a[e])));
                CHECK(std::abs(q1.tensors[size_t(ti)].a[e] - t.a[e]) <= max_abs / 254.0);
                CHECK(std::abs(q2.tensors[size_t(ti)].a[e] - t.a[e]) <= max_abs / 3.0);
            }
        }
    }
}

TEST_CASE("wire: frozen tensors are skipped on the wire and decode to zero") {
    ModelConfig cfg{7, 5, 5, 3, 2};
    Rng rng(99);
    UpdateDelta d = random_delta(cfg, 1, 0.1, rng);
    const WireUpdate w1 = quantize(d, 1, cfg);
    const WireUpdate w3 = quantize(random_delta(cfg, 3, 0.1, rng), 1, cfg);
    CHECK(w1.bytes.size() < w3.bytes.size());
    CHECK((long long)w1.bytes.size() == wire_message_bytes(cfg, 1, 1));
    CHECK((long long)w3.bytes.size() == wire_message_bytes(cfg, 3, 1));

    const UpdateDelta out = dequantize(w1, cfg);
    CHECK(out.k == 1);
    for (int ti = 0; ti < int(out.tensors.size()); ++ti) {
        if (tensor_unfrozen(ti, cfg.n_blocks, 1)) continue;
        for (double v : out.tensors[size_t(ti)].a) CHECK(v == 0.0);
    }
}

TEST_CASE("wire: message sizes match the documented layout") {
    ModelConfig cfg{65, 64, 64, 4, 8};
    // q=0: 4 header + 4 bytes per value
    CHECK(wire_message_bytes(cfg, 4, 0) == 4 + 4 * active_params(cfg, 4));
    // q=1: 4 header + per tensor (4-byte scale + 1 byte per value)
    // full depth has 2 * 4 + 3 = 11 tensors
    CHECK(wire_message_bytes(cfg, 4, 1) == 4 + 11 * 4 + active_params(cfg, 4));
    // q=2 packs 4 values per byte, padded per tensor
    long long expected = 4;
    const ModelParams shape = zero_params(cfg);
    for (int i = 0; i < shape.tensor_count(); ++i) {
        expected += 4 + (long long)((shape.tensor(i).count() + 3) / 4);
    }
    CHECK(wire_message_bytes(cfg, 4, 2) == expected);
}

TEST_CASE("wire: corrupt payloads are rejected") {
    ModelConfig cfg{5, 4, 4, 2, 3};
    Rng rng(5);
    WireUpdate w = quantize(random_delta(cfg, 2, 0.1, rng), 2, cfg);

    WireUpdate truncated = w;
    truncated.bytes.pop_back();
    CHECK_THROWS(dequantize(truncated, cfg));

    WireUpdate padded = w;
    padded.bytes.push_back(0);
    CHECK_THROWS(dequantize(padded, cfg));

    WireUpdate bad_header = w;
    bad_header.bytes[1] = 9;  // k out of range
    CHECK_THROWS(dequantize(bad_header, cfg));

    CHECK_THROWS(quantize(random_delta(cfg, 2, 0.1, rng), 3, cfg));
}
