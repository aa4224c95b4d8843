#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "retrace/error.hpp"

namespace retrace {

/// Five retweeting-activity categories. News and blog traces share one class.
/// The enumerator order is the fixed class order used for tie-breaking.
enum class ActivityClass : std::uint8_t {
    NewsAndBlogs = 0,
    AdsAndPromotion,
    Campaign,
    AutoTweet,
    ParasiticAds,
};

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<ActivityClass, kNumClasses> kAllClasses = {
    ActivityClass::NewsAndBlogs, ActivityClass::AdsAndPromotion, ActivityClass::Campaign,
    ActivityClass::AutoTweet, ActivityClass::ParasiticAds,
};

constexpr std::size_t class_index(ActivityClass c) noexcept { return static_cast<std::size_t>(c); }

constexpr ActivityClass class_from_index(std::size_t i) {
    if (i >= kNumClasses) throw Error("class index out of range: " + std::to_string(i));
    return static_cast<ActivityClass>(i);
}

/// Wire name used in label files and reports.
constexpr std::string_view to_string(ActivityClass c) noexcept {
    switch (c) {
        case ActivityClass::NewsAndBlogs: return "news_blogs";
        case ActivityClass::AdsAndPromotion: return "ads_promotion";
        case ActivityClass::Campaign: return "campaign";
        case ActivityClass::AutoTweet: return "auto_tweet";
        case ActivityClass::ParasiticAds: return "parasitic_ads";
    }
    return "unknown";
}

inline std::optional<ActivityClass> parse_activity_class(std::string_view name) noexcept {
    for (ActivityClass c : kAllClasses) {
        if (to_string(c) == name) return c;
    }
    return std::nullopt;
}

/// Per-class values indexed by class_index().
using ClassScores = std::array<double, kNumClasses>;

}  // namespace retrace
