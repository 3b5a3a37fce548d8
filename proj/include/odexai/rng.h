// Copyright 2026 The ODExAI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ODEXAI_RNG_H_
#define ODEXAI_RNG_H_

#include <cstdint>
#include <initializer_list>

namespace odexai {

// Stateless counter-based generator: every draw is a pure function of
// (seed, key...), so mask i is reproducible regardless of which worker
// produces it or in what order.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  // 64 random bits for the given key path.
  constexpr std::uint64_t Bits(std::initializer_list<std::uint64_t> key) const {
    std::uint64_t h = Mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t k : key) {
      h = Mix(h ^ Mix(k + 0x9e3779b97f4a7c15ULL));
    }
    return h;
  }

  // Uniform double in [0, 1) with 53 bits of resolution.
  constexpr double Uniform(std::initializer_list<std::uint64_t> key) const {
    return static_cast<double>(Bits(key) >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer.
  static constexpr std::uint64_t Mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace odexai

#endif  // ODEXAI_RNG_H_
