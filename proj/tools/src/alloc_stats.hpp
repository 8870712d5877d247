#pragma once

#include <cstddef>

namespace edffd::tools {

/// Heap bytes currently allocated through malloc and friends, and the high
/// water mark since the last reset_peak().
void reset_peak() noexcept;
std::size_t current_bytes() noexcept;
std::size_t peak_bytes() noexcept;

}  // namespace edffd::tools
