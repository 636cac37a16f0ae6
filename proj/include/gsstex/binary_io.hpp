#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "gsstex/error.hpp"

// Little-endian scalar serialization shared by the feature, encoder and SVM
// file formats.
namespace gsstex::binio {

template <typename T>
    requires std::is_arithmetic_v<T>
void write_le(std::ostream& out, T value) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    const U bits = std::bit_cast<U>(value);
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
    requires std::is_arithmetic_v<T>
T read_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        throw DataError("unexpected end of binary stream");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return std::bit_cast<T>(bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto n = read_le<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 32)) throw DataError("string length out of range");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
        throw DataError("unexpected end of binary stream");
    return s;
}

}  // namespace gsstex::binio
