#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phonoscope/corpus.hpp"
#include "phonoscope/feature_config.hpp"
#include "phonoscope/types.hpp"

namespace phonoscope {

// Unit feature directions for one language, estimated on healthy-control tokens only.
struct DirectionSet {
    std::string language;
    std::array<std::optional<std::vector<double>>, kSegmentalCount> directions;
    std::size_t hc_speaker_count = 0;
    std::array<std::size_t, kSegmentalCount> hc_pos_tokens{};
    std::array<std::size_t, kSegmentalCount> hc_neg_tokens{};

    const std::optional<std::vector<double>>& of(Feature f) const {
        return directions.at(index_of(f));
    }
};

struct DirectionOptions {
    // Strict: throw EmptyFeatureClass when a defined contrast has an empty class.
    // Lenient: leave that direction missing.
    bool require_all = true;
};

// Throws Error{NoHealthyControls | EmptyFeatureClass | DegenerateDirection}.
DirectionSet estimate_directions(const Corpus& corpus, const std::string& language,
                                 const FeatureConfig& fc, const DirectionOptions& options = {});

// normalize(mean(pos) - mean(neg)); throws DegenerateDirection on a zero difference.
std::vector<double> feature_direction(const std::vector<std::span<const float>>& pos,
                                      const std::vector<std::span<const float>>& neg);

double project(std::span<const float> embedding, std::span<const double> direction);

// Sensitivity index with pooled sample variance. Throws DegenerateVariance when the
// pooled sd is below 1e-12 and InvalidArgument when a side has fewer than 2 values.
double dprime(std::span<const double> pos, std::span<const double> neg);

struct SegmentalResult {
    std::array<std::optional<double>, kSegmentalCount> dprime;
    std::array<ClassCount, kSegmentalCount> counts{};
    std::vector<std::string> warnings;
};

SegmentalResult segmental_profile(const Corpus& corpus, std::size_t speaker,
                                  const DirectionSet& directions, const FeatureConfig& fc);

struct StructuralResult {
    std::optional<double> boundary_sharpness;
    std::optional<double> cross_position_cos;
    std::optional<double> vowel_triangle_area;
};

inline constexpr std::size_t kMinCornerTokens = 3;

StructuralResult structural_metrics(const Corpus& corpus, std::size_t speaker,
                                    const FeatureConfig& fc);

struct ProsodicResult {
    std::optional<double> speech_rate;
    std::optional<double> pause_rate;
    std::optional<double> vowel_duration_cv;
};

inline constexpr double kPauseThresholdS = 0.150;

ProsodicResult prosodic_metrics(const Corpus& corpus, std::size_t speaker,
                                const FeatureConfig* fc);

struct SpeakerProfile {
    std::string speaker_id;
    std::string backbone_id;
    std::array<std::optional<double>, kFeatureCount> values;
    std::size_t n_phones = 0;

    const std::optional<double>& operator[](Feature f) const { return values.at(index_of(f)); }
    std::optional<double>& operator[](Feature f) { return values.at(index_of(f)); }

    // Mean of the five consonant d-primes; missing unless all five are present.
    std::optional<double> composite() const;
    std::optional<double> value(const Measure& m) const;
};

struct ProfileRow {
    SpeakerMeta meta;
    SpeakerProfile profile;
    std::vector<std::string> flags;
};

class ProfileTable {
public:
    ProfileTable() = default;
    explicit ProfileTable(std::vector<ProfileRow> rows) : rows_(std::move(rows)) {}

    const std::vector<ProfileRow>& rows() const noexcept { return rows_; }
    std::vector<ProfileRow>& rows() noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    // Rows for which pred(row) holds.
    template <typename Pred>
    ProfileTable filter(Pred pred) const {
        std::vector<ProfileRow> kept;
        for (const auto& r : rows_)
            if (pred(r)) kept.push_back(r);
        return ProfileTable(std::move(kept));
    }

    // Features divided by the language-specific HC mean of that feature
    // (computed over HC rows where the feature is present).
    ProfileTable hc_normalized() const;

private:
    std::vector<ProfileRow> rows_;
};

using DirectionMap = std::map<std::string, DirectionSet>;

// One row per manifest speaker. Speakers whose language lacks directions or a feature
// config keep segmental features missing and are flagged.
ProfileTable assemble_profiles(const Corpus& corpus, const DirectionMap& directions,
                               const FeatureConfigMap& configs,
                               std::vector<Finding>* findings = nullptr);

// Estimates directions (lenient) for every language with HC speakers, then assembles.
ProfileTable build_profile_table(const Corpus& corpus, const FeatureConfigMap& configs,
                                 std::vector<Finding>* findings = nullptr,
                                 DirectionMap* directions_out = nullptr);

std::string dump_profiles_csv(const ProfileTable& table);
ProfileTable parse_profiles_csv(std::string_view text);

} // namespace phonoscope
