#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "sonofield/error.hpp"

namespace sonofield::binio {

template <typename T>
T byteswap_if_big(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

/// Writes a little-endian scalar.
template <typename T>
void put(std::ostream& out, T value) {
    value = byteswap_if_big(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Reads a little-endian scalar; `what` names the field in error messages.
template <typename T>
T get(std::istream& in, const char* what) {
    T value;
    const auto offset = static_cast<long long>(in.tellg());
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw DataError(std::string("truncated file reading ") + what + " at byte offset " + std::to_string(offset));
    return byteswap_if_big(value);
}

}  // namespace sonofield::binio
