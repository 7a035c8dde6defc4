#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "harsel/error.hpp"

namespace harsel {

/// The six UCI-HAR activities. Enum order is the label index used for every
/// tie-break ("lowest label index wins").
enum class Activity : std::uint8_t {
    Walking = 0,
    WalkingUpstairs,
    WalkingDownstairs,
    Sitting,
    Standing,
    Laying,
};

inline constexpr std::size_t kNumActivities = 6;

inline constexpr std::array<Activity, kNumActivities> kAllActivities = {
    Activity::Walking, Activity::WalkingUpstairs, Activity::WalkingDownstairs,
    Activity::Sitting, Activity::Standing,        Activity::Laying,
};

inline constexpr std::size_t index_of(Activity a) noexcept {
    return static_cast<std::size_t>(a);
}

inline constexpr Activity activity_at(std::size_t i) {
    if (i >= kNumActivities) throw ArgumentError("activity index out of range");
    return static_cast<Activity>(i);
}

inline constexpr std::string_view activity_name(Activity a) noexcept {
    constexpr std::array<std::string_view, kNumActivities> names = {
        "WALKING", "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS",
        "SITTING", "STANDING",         "LAYING",
    };
    return names[index_of(a)];
}

inline std::optional<Activity> parse_activity(std::string_view name) noexcept {
    for (Activity a : kAllActivities)
        if (activity_name(a) == name) return a;
    return std::nullopt;
}

/// UCI-HAR activity codes 1..6 follow the enum order.
inline Activity activity_from_ucihar_code(int code) {
    if (code < 1 || code > static_cast<int>(kNumActivities))
        throw FormatError("activity code " + std::to_string(code) + " outside 1..6");
    return static_cast<Activity>(code - 1);
}

/// DYNAMIC = {WALKING, WALKING_UPSTAIRS, WALKING_DOWNSTAIRS}; the rest are STATIC.
inline constexpr bool is_dynamic(Activity a) noexcept {
    return a == Activity::Walking || a == Activity::WalkingUpstairs ||
           a == Activity::WalkingDownstairs;
}

enum class Domain : std::uint8_t { Static = 0, Dynamic = 1 };

inline constexpr Domain domain_of(Activity a) noexcept {
    return is_dynamic(a) ? Domain::Dynamic : Domain::Static;
}

}  // namespace harsel
