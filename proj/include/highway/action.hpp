#pragma once

namespace highway {

enum class LonAction { maintain = 0, accelerate = 1, brake = 2, hard_brake = 3 };
enum class LatAction { keep = 0, change_left = 1, change_right = 2 };

// One of the 12 discrete (longitudinal x lateral) decisions.
struct HighLevelAction {
    LonAction lon = LonAction::maintain;
    LatAction lat = LatAction::keep;

    int index() const { return static_cast<int>(lon) * 3 + static_cast<int>(lat); }

    static HighLevelAction from_index(int i) {
        return {static_cast<LonAction>(i / 3), static_cast<LatAction>(i % 3)};
    }

    bool operator==(const HighLevelAction&) const = default;
};

inline constexpr int kNumActions = 12;

// Acceleration levels (m/s^2) behind the four longitudinal choices.
inline constexpr double kAccelLevels[4] = {0.0, 2.0, -2.0, -4.0};

inline double accel_level(LonAction a) { return kAccelLevels[static_cast<int>(a)]; }

}  // namespace highway
