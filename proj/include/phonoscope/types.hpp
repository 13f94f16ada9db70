#pragma once

// Shared domain vocabulary: speaker metadata enums and the 15 profile features.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace phonoscope {

enum class Aetiology : std::uint8_t { HC, PD, CP, ALS, DS, Stroke, Other };
enum class Severity : std::uint8_t { control, mild, moderate, severe, unknown };
enum class SeveritySource : std::uint8_t { clinical, threshold, none };

inline constexpr std::array<Aetiology, 6> kMainAetiologies = {
    Aetiology::HC, Aetiology::PD, Aetiology::CP, Aetiology::ALS, Aetiology::DS, Aetiology::Stroke};

inline constexpr std::array<Severity, 4> kKnownSeverities = {
    Severity::control, Severity::mild, Severity::moderate, Severity::severe};

std::string_view to_string(Aetiology a) noexcept;
std::string_view to_string(Severity s) noexcept;
std::string_view to_string(SeveritySource s) noexcept;

std::optional<Aetiology> parse_aetiology(std::string_view s) noexcept;
std::optional<Severity> parse_severity(std::string_view s) noexcept;
std::optional<SeveritySource> parse_severity_source(std::string_view s) noexcept;

// control=0 ... severe=3; unknown has no ordinal.
std::optional<int> severity_ordinal(Severity s) noexcept;

bool is_main_aetiology(Aetiology a) noexcept;

struct SpeakerMeta {
    std::string speaker_id;
    std::string dataset;
    std::string language;
    Aetiology aetiology = Aetiology::Other;
    Severity severity = Severity::unknown;
    SeveritySource severity_source = SeveritySource::none;
    std::optional<double> intelligibility_pct;
    std::optional<double> ctc_conf;

    bool operator==(const SpeakerMeta&) const = default;
};

// Order matters: it is the column order of profiles.csv.
enum class Feature : std::uint8_t {
    nasality,
    voicing,
    sonorance,
    stridency,
    manner,
    height,
    lowness,
    backness,
    rounding,
    boundary_sharpness,
    cross_position_cos,
    vowel_triangle_area,
    speech_rate,
    pause_rate,
    vowel_duration_cv,
};

inline constexpr std::size_t kFeatureCount = 15;
inline constexpr std::size_t kSegmentalCount = 9;
inline constexpr std::size_t kConsonantCount = 5;

constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }
constexpr Feature feature_at(std::size_t i) noexcept { return static_cast<Feature>(i); }
constexpr bool is_segmental(Feature f) noexcept { return index_of(f) < kSegmentalCount; }
constexpr bool is_consonant(Feature f) noexcept { return index_of(f) < kConsonantCount; }

std::string_view feature_name(Feature f) noexcept;
std::optional<Feature> parse_feature(std::string_view name) noexcept;

enum class FeatureSubset { full15, main13, consonant5 };

std::span<const Feature> features_in(FeatureSubset subset) noexcept;
std::optional<FeatureSubset> parse_feature_subset(std::string_view name) noexcept;

inline constexpr std::string_view kCompositeName = "composite_consonant_dprime";

// A column of the profile table an analysis can be pointed at: one of the 15
// features or the composite consonant d'.
struct Measure {
    bool composite = true;
    Feature feature = Feature::nasality;

    static constexpr Measure composite_dprime() noexcept { return {true, Feature::nasality}; }
    static constexpr Measure of(Feature f) noexcept { return {false, f}; }

    std::string_view name() const noexcept {
        return composite ? kCompositeName : feature_name(feature);
    }
    bool operator==(const Measure&) const = default;
};

std::optional<Measure> parse_measure(std::string_view name) noexcept;

} // namespace phonoscope
