#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

namespace msm {

// States of the oncology model. State 4 is absorbing.
enum class State : int { stable = 1, response = 2, progression = 3, death = 4 };

struct Transition {
  int from;
  int to;
  friend bool operator==(const Transition&, const Transition&) = default;
};

inline constexpr std::size_t kNumStates = 4;
inline constexpr std::size_t kNumTransitions = 6;

// Transition index k (0-based) corresponds to the 1-based index k + 1 used in
// reports: 1 = 1->2, 2 = 1->3, 3 = 1->4, 4 = 2->3, 5 = 2->4, 6 = 3->4.
inline constexpr std::array<Transition, kNumTransitions> kTransitions{{
    {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}}};

inline constexpr std::size_t k12 = 0;
inline constexpr std::size_t k13 = 1;
inline constexpr std::size_t k14 = 2;
inline constexpr std::size_t k23 = 3;
inline constexpr std::size_t k24 = 4;
inline constexpr std::size_t k34 = 5;

inline std::optional<std::size_t> transition_index(int from, int to) {
  for (std::size_t k = 0; k < kNumTransitions; ++k)
    if (kTransitions[k].from == from && kTransitions[k].to == to) return k;
  return std::nullopt;
}

inline std::string transition_label(std::size_t k) {
  return std::to_string(kTransitions[k].from) + "->" +
         std::to_string(kTransitions[k].to);
}

// Out-transition indices of a state, in the fixed order above.
inline constexpr std::array<std::array<int, 3>, kNumStates> kOutTransitions{{
    {0, 1, 2}, {3, 4, -1}, {5, -1, -1}, {-1, -1, -1}}};

}  // namespace msm
