#pragma once

#include <cmath>
#include <cstdint>

namespace swapsim {

// Simulated time is kept in integer microseconds.
using Micros = std::int64_t;
using Bytes = std::uint64_t;
using GpuId = int;

inline constexpr Bytes KiB = 1024;
inline constexpr Bytes MiB = 1024 * KiB;
inline constexpr Bytes GiB = 1024 * MiB;

inline constexpr Micros kMicrosPerMs = 1000;
inline constexpr Micros kMicrosPerSec = 1000 * kMicrosPerMs;

inline Micros from_ms(double ms) { return static_cast<Micros>(std::llround(ms * 1000.0)); }
inline double to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }

// bytes/second -> bytes/microsecond
inline double per_us(double bytes_per_sec) { return bytes_per_sec / 1e6; }

}  // namespace swapsim
