#pragma once

// Long-form Praat TextGrid ("ooTextFile") reader/writer, interval tiers only.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phonoscope {

struct TextGridInterval {
    std::string label;  // may be empty: silence / pause
    double xmin = 0.0;
    double xmax = 0.0;

    bool operator==(const TextGridInterval&) const = default;
};

struct TextGridTier {
    std::string name;
    double xmin = 0.0;
    double xmax = 0.0;
    std::vector<TextGridInterval> intervals;

    bool operator==(const TextGridTier&) const = default;
};

struct TierSet {
    double xmin = 0.0;
    double xmax = 0.0;
    std::vector<TextGridTier> tiers;

    const TextGridTier* find(std::string_view name) const noexcept;
    bool operator==(const TierSet&) const = default;
};

// Throws Error{MalformedHeader | TruncatedTier | NonMonotoneIntervals | MalformedTextGrid}.
// Point tiers (TextTier) are parsed and dropped.
TierSet parse_textgrid(std::string_view text);

std::string write_textgrid(const TierSet& tiers);

} // namespace phonoscope
