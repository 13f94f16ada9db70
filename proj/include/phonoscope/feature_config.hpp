#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "phonoscope/types.hpp"

namespace phonoscope {

struct PhoneClasses {
    std::set<std::string> pos;
    std::set<std::string> neg;

    bool operator==(const PhoneClasses&) const = default;
};

// Per-language phone -> phonological class mapping. Labels are stored NFC-normalized.
struct FeatureConfig {
    std::string language;
    // Indexed by segmental feature (nasality..rounding); absent = contrast not defined.
    std::array<std::optional<PhoneClasses>, kSegmentalCount> classes;
    std::array<std::string, 3> vowel_corners{"a", "i", "u"};
    std::set<std::string> vowel_set;

    const std::optional<PhoneClasses>& of(Feature f) const { return classes.at(index_of(f)); }
    bool is_vowel(const std::string& label) const { return vowel_set.contains(label); }

    bool operator==(const FeatureConfig&) const = default;
};

// Throws Error{OverlappingClasses | EmptyClass | UnknownFeatureKey | MalformedFile}.
FeatureConfig load_feature_config(std::string_view json_text);
std::string dump_feature_config(const FeatureConfig& fc);

using FeatureConfigMap = std::map<std::string, FeatureConfig>;

// Loads every *.json in dir, keyed by the config's language.
FeatureConfigMap load_feature_configs(const std::filesystem::path& dir);

} // namespace phonoscope
