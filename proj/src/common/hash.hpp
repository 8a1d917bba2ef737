#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace volprop {

// 64-bit FNV-1a. Stable across platforms, used for config ids, cache keys
// and rule-table fingerprints (not for anything security related).
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) noexcept;
  void update(std::string_view text) noexcept;
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view text);

}  // namespace volprop
