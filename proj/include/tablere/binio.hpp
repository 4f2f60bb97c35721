#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tablere/errors.hpp"

namespace tablere::binio {

// Little-endian primitives shared by the TBRE and TBMD file formats.
// Serialization is byte-by-byte so the layout is fixed regardless of host
// endianness.

inline void put_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) {
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(os, bits);
}

[[noreturn]] inline void fail_truncated(const std::string& what, std::uint64_t offset) {
    throw FormatError(what + ": truncated at byte offset " + std::to_string(offset));
}

inline std::uint8_t get_u8(std::istream& is, const std::string& what, std::uint64_t offset) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) {
        fail_truncated(what, offset);
    }
    return static_cast<std::uint8_t>(c);
}

inline std::uint16_t get_u16(std::istream& is, const std::string& what, std::uint64_t offset) {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
        v |= static_cast<std::uint16_t>(get_u8(is, what, offset + static_cast<std::uint64_t>(i)))
             << (8 * i);
    }
    return v;
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what, std::uint64_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(get_u8(is, what, offset + static_cast<std::uint64_t>(i)))
             << (8 * i);
    }
    return v;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what, std::uint64_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(get_u8(is, what, offset + static_cast<std::uint64_t>(i)))
             << (8 * i);
    }
    return v;
}

inline float get_f32(std::istream& is, const std::string& what, std::uint64_t offset) {
    const std::uint32_t bits = get_u32(is, what, offset);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

/// CRC-32 (IEEE 802.3 polynomial, reflected), as used by zip/png.
class Crc32 {
public:
    Crc32() { reset(); }

    void reset() { state_ = 0xffffffffu; }

    void update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        std::uint32_t c = state_;
        for (std::size_t i = 0; i < n; ++i) {
            c = table()[(c ^ p[i]) & 0xffu] ^ (c >> 8);
        }
        state_ = c;
    }

    std::uint32_t value() const { return state_ ^ 0xffffffffu; }

    static std::uint32_t of(const void* bytes, std::size_t n) {
        Crc32 crc;
        crc.update(bytes, n);
        return crc.value();
    }

private:
    static const std::array<std::uint32_t, 256>& table() {
        static const std::array<std::uint32_t, 256> t = [] {
            std::array<std::uint32_t, 256> out{};
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int k = 0; k < 8; ++k) {
                    c = (c & 1u) ? (0xedb88320u ^ (c >> 1)) : (c >> 1);
                }
                out[i] = c;
            }
            return out;
        }();
        return t;
    }

    std::uint32_t state_;
};

} // namespace tablere::binio
