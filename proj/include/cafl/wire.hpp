#pragma once

#include <cstdint>
#include <vector>

#include "cafl/model.hpp"

namespace cafl {

// Serialized model update as a client would transmit it. Layout:
//   byte 0: q, byte 1: k, bytes 2..3: reserved zeros,
// then each unfrozen tensor in canonical order:
//   q=0: count float32 values (little endian)
//   q=1: float32 scale, then count int8 codes in [-127, 127]
//   q=2: float32 scale, then ceil(count/4) bytes of 2-bit codes, low bits
//        first, code c in {-3,-1,1,3} stored as (c+3)/2
struct WireUpdate {
    int q = 0;
    int k = 0;
    std::vector<uint8_t> bytes;  // full message including the 4-byte header
};

WireUpdate quantize(const UpdateDelta& delta, int q, const ModelConfig& cfg);
UpdateDelta dequantize(const WireUpdate& wire, const ModelConfig& cfg);

// Exact encoded message size for a given shape; used for wire accounting.
long long wire_message_bytes(const ModelConfig& cfg, int k, int q);

// quantize then dequantize, so training sees exactly what the wire carries.
UpdateDelta codec_roundtrip(const UpdateDelta& delta, int q, const ModelConfig& cfg,
                            long long* encoded_bytes = nullptr);

}  // namespace cafl
