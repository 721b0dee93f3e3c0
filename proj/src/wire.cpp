#include "cafl/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cafl {

namespace {

void put_f32(std::vector<uint8_t>& out, float v) {
    const uint32_t bits = std::bit_cast<uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
        out.push_back(uint8_t((bits >> (8 * i)) & 0xff));
    }
}

float get_f32(const std::vector<uint8_t>& in, size_t& pos) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
        bits |= uint32_t(in[pos + size_t(i)]) << (8 * i);
    }
    pos += 4;
    return std::bit_cast<float>(bits);
}

double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.a) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

// Largest float32 scale with (double)scale <= max_abs / divisor. Keeping the
// stored scale on the low side preserves the exact quantizer error bounds
// (scale/2 for q=1, scale for q=2).
float pick_scale(double max_abs_v, double divisor) {
    if (max_abs_v == 0.0) {
        return 0.0f;
    }
    const double exact = max_abs_v / divisor;
    float s = float(exact);
    while (double(s) > exact) {
        s = std::nextafter(s, 0.0f);
    }
    return s;
}

long long tensor_payload_bytes(size_t count, int q) {
    switch (q) {
        case 0: return (long long)count * 4;
        case 1: return 4 + (long long)count;
        case 2: return 4 + (long long)((count + 3) / 4);
        default: throw std::invalid_argument("wire: q must be 0, 1 or 2");
    }
}

}  // namespace

long long wire_message_bytes(const ModelConfig& cfg, int k, int q) {
    ModelParams shape = zero_params(cfg);
    long long total = 4;  // header
    for (int i = 0; i < shape.tensor_count(); ++i) {
        if (tensor_unfrozen(i, cfg.n_blocks, k)) {
            total += tensor_payload_bytes(shape.tensor(i).count(), q);
        }
    }
    return total;
}

WireUpdate quantize(const UpdateDelta& delta, int q, const ModelConfig& cfg) {
    if (q < 0 || q > 2) {
        throw std::invalid_argument("quantize: q must be 0, 1 or 2");
    }
    WireUpdate wire;
    wire.q = q;
    wire.k = delta.k;
    wire.bytes.reserve(size_t(wire_message_bytes(cfg, delta.k, q)));
    wire.bytes.push_back(uint8_t(q));
    wire.bytes.push_back(uint8_t(delta.k));
    wire.bytes.push_back(0);
    wire.bytes.push_back(0);

    for (int i = 0; i < int(delta.tensors.size()); ++i) {
        if (!tensor_unfrozen(i, cfg.n_blocks, delta.k)) {
            continue;
        }
        const Tensor& t = delta.tensors[size_t(i)];
        if (q == 0) {
            for (double v : t.a) {
                put_f32(wire.bytes, float(v));
            }
        } else if (q == 1) {
            const float scale = pick_scale(max_abs(t), 127.0);
            put_f32(wire.bytes, scale);
            for (double v : t.a) {
                long code = (scale == 0.0f) ? 0 : std::lround(v / double(scale));
                code = std::max(-127l, std::min(127l, code));
                wire.bytes.push_back(uint8_t(int8_t(code)));
            }
        } else {
            const float scale = pick_scale(max_abs(t), 3.0);
            put_f32(wire.bytes, scale);
            uint8_t packed = 0;
            int filled = 0;
            for (double v : t.a) {
                // levels are {-3, -1, 1, 3} * scale; decision boundary at 2 * scale
                int code;
                if (v >= 0.0) {
                    code = (v > 2.0 * double(scale)) ? 3 : 1;
                } else {
                    code = (v < -2.0 * double(scale)) ? -3 : -1;
                }
                packed |= uint8_t((code + 3) / 2) << (2 * filled);
                if (++filled == 4) {
                    wire.bytes.push_back(packed);
                    packed = 0;
                    filled = 0;
                }
            }
            if (filled > 0) {
                wire.bytes.push_back(packed);  // zero-padded tail
            }
        }
    }
    return wire;
}

UpdateDelta dequantize(const WireUpdate& wire, const ModelConfig& cfg) {
    if (wire.bytes.size() < 4) {
        throw std::runtime_error("wire: corrupt payload (missing header)");
    }
    const int q = wire.bytes[0];
    const int k = wire.bytes[1];
    if (q < 0 || q > 2 || k < 1 || k > cfg.n_blocks) {
        throw std::runtime_error("wire: corrupt header");
    }
    if ((long long)wire.bytes.size() != wire_message_bytes(cfg, k, q)) {
        throw std::runtime_error("wire: corrupt payload length");
    }

    ModelParams shape = zero_params(cfg);
    UpdateDelta delta;
    delta.k = k;
    size_t pos = 4;
    for (int i = 0; i < shape.tensor_count(); ++i) {
        Tensor t(shape.tensor(i).rows, shape.tensor(i).cols);
        if (tensor_unfrozen(i, cfg.n_blocks, k)) {
            if (q == 0) {
                for (double& v : t.a) {
                    v = double(get_f32(wire.bytes, pos));
                }
            } else if (q == 1) {
                const double scale = double(get_f32(wire.bytes, pos));
                for (double& v : t.a) {
                    v = double(int8_t(wire.bytes[pos++])) * scale;
                }
            } else {
                const double scale = double(get_f32(wire.bytes, pos));
                const size_t count = t.a.size();
                for (size_t e = 0; e < count; ++e) {
                    const uint8_t byte = wire.bytes[pos + e / 4];
                    const int code2 = (byte >> (2 * (e % 4))) & 0x3;
                    t.a[e] = double(2 * code2 - 3) * scale;
                }
                pos += (count + 3) / 4;
            }
        }
        delta.tensors.push_back(std::move(t));
    }
    return delta;
}

UpdateDelta codec_roundtrip(const UpdateDelta& delta, int q, const ModelConfig& cfg,
                            long long* encoded_bytes) {
    const WireUpdate wire = quantize(delta, q, cfg);
    if (encoded_bytes != nullptr) {
        *encoded_bytes = (long long)wire.bytes.size();
    }
    return dequantize(wire, cfg);
}

}  // namespace cafl
