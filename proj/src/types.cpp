#include "phonoscope/types.hpp"

#include <algorithm>

namespace phonoscope {

namespace {

constexpr std::array<std::string_view, 7> kAetiologyNames = {"HC", "PD", "CP", "ALS",
                                                             "DS", "Stroke", "Other"};
constexpr std::array<std::string_view, 5> kSeverityNames = {"control", "mild", "moderate",
                                                            "severe", "unknown"};
constexpr std::array<std::string_view, 3> kSourceNames = {"clinical", "threshold", "none"};

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "nasality",           "voicing",            "sonorance",
    "stridency",          "manner",             "height",
    "lowness",            "backness",           "rounding",
    "boundary_sharpness", "cross_position_cos", "vowel_triangle_area",
    "speech_rate",        "pause_rate",         "vowel_duration_cv",
};

constexpr auto make_all() {
    std::array<Feature, kFeatureCount> out{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = feature_at(i);
    return out;
}

constexpr std::array<Feature, kFeatureCount> kFull15 = make_all();

constexpr std::array<Feature, 13> kMain13 = {
    Feature::nasality,  Feature::voicing,  Feature::sonorance,
    Feature::stridency, Feature::manner,   Feature::height,
    Feature::lowness,   Feature::backness, Feature::rounding,
    Feature::vowel_triangle_area, Feature::speech_rate, Feature::pause_rate,
    Feature::vowel_duration_cv,
};

constexpr std::array<Feature, kConsonantCount> kConsonant5 = {
    Feature::nasality, Feature::voicing, Feature::sonorance, Feature::stridency,
    Feature::manner};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) return std::nullopt;
    return static_cast<Enum>(it - names.begin());
}

} // namespace

std::string_view to_string(Aetiology a) noexcept { return kAetiologyNames[static_cast<int>(a)]; }
std::string_view to_string(Severity s) noexcept { return kSeverityNames[static_cast<int>(s)]; }
std::string_view to_string(SeveritySource s) noexcept { return kSourceNames[static_cast<int>(s)]; }

std::optional<Aetiology> parse_aetiology(std::string_view s) noexcept {
    return lookup<Aetiology>(kAetiologyNames, s);
}
std::optional<Severity> parse_severity(std::string_view s) noexcept {
    return lookup<Severity>(kSeverityNames, s);
}
std::optional<SeveritySource> parse_severity_source(std::string_view s) noexcept {
    return lookup<SeveritySource>(kSourceNames, s);
}

std::optional<int> severity_ordinal(Severity s) noexcept {
    if (s == Severity::unknown) return std::nullopt;
    return static_cast<int>(s);
}

bool is_main_aetiology(Aetiology a) noexcept { return a != Aetiology::Other; }

std::string_view feature_name(Feature f) noexcept { return kFeatureNames[index_of(f)]; }

std::optional<Feature> parse_feature(std::string_view name) noexcept {
    return lookup<Feature>(kFeatureNames, name);
}

std::span<const Feature> features_in(FeatureSubset subset) noexcept {
    switch (subset) {
    case FeatureSubset::full15: return kFull15;
    case FeatureSubset::main13: return kMain13;
    case FeatureSubset::consonant5: return kConsonant5;
    }
    return kFull15;
}

std::optional<FeatureSubset> parse_feature_subset(std::string_view name) noexcept {
    if (name == "FULL15" || name == "full15") return FeatureSubset::full15;
    if (name == "MAIN13" || name == "main13") return FeatureSubset::main13;
    if (name == "CONSONANT5" || name == "consonant5") return FeatureSubset::consonant5;
    return std::nullopt;
}

std::optional<Measure> parse_measure(std::string_view name) noexcept {
    if (name == kCompositeName || name == "composite") return Measure::composite_dprime();
    if (auto f = parse_feature(name)) return Measure::of(*f);
    return std::nullopt;
}

} // namespace phonoscope
