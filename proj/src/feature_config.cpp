#include "phonoscope/feature_config.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "phonoscope/error.hpp"
#include "phonoscope/unicode.hpp"

namespace phonoscope {

using nlohmann::json;

namespace {

std::set<std::string> label_set(const json& j, const std::string& where) {
    if (!j.is_array()) fail(ErrorKind::MalformedFile, where + " must be an array of strings");
    std::set<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string())
            fail(ErrorKind::MalformedFile, where + " must be an array of strings");
        out.insert(nfc(item.get<std::string>()));
    }
    return out;
}

void load_group(const json& group, std::string_view group_name, std::size_t first,
                std::size_t last, FeatureConfig& fc) {
    if (!group.is_object())
        fail(ErrorKind::MalformedFile, std::string(group_name) + " must be an object");
    for (const auto& [key, value] : group.items()) {
        const auto f = parse_feature(key);
        if (!f || index_of(*f) < first || index_of(*f) >= last)
            fail(ErrorKind::UnknownFeatureKey,
                 "'" + key + "' is not a feature of " + std::string(group_name));
        if (!value.is_object())
            fail(ErrorKind::MalformedFile, key + " must be an object with pos and neg");
        for (const auto& [k, _] : value.items())
            if (k != "pos" && k != "neg")
                fail(ErrorKind::MalformedFile, key + ": unexpected key '" + k + "'");
        if (!value.contains("pos") || !value.contains("neg"))
            fail(ErrorKind::MalformedFile, key + " must have pos and neg");
        PhoneClasses pc{label_set(value["pos"], key + ".pos"), label_set(value["neg"], key + ".neg")};
        if (pc.pos.empty()) fail(ErrorKind::EmptyClass, key + " has an empty pos class");
        if (pc.neg.empty()) fail(ErrorKind::EmptyClass, key + " has an empty neg class");
        for (const auto& label : pc.pos)
            if (pc.neg.contains(label))
                fail(ErrorKind::OverlappingClasses,
                     key + ": '" + label + "' is in both pos and neg");
        fc.classes[index_of(*f)] = std::move(pc);
    }
}

} // namespace

FeatureConfig load_feature_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedFile, std::string("feature config: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::MalformedFile, "feature config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "language" && key != "consonant_features" && key != "vowel_features" &&
            key != "vowel_corners" && key != "vowel_set")
            fail(ErrorKind::UnknownFeatureKey, "unknown top-level key '" + key + "'");

    FeatureConfig fc;
    if (!j.contains("language") || !j["language"].is_string() ||
        j["language"].get<std::string>().empty())
        fail(ErrorKind::MalformedFile, "feature config needs a non-empty language");
    fc.language = j["language"].get<std::string>();

    if (j.contains("consonant_features"))
        load_group(j["consonant_features"], "consonant_features", 0, kConsonantCount, fc);
    if (j.contains("vowel_features"))
        load_group(j["vowel_features"], "vowel_features", kConsonantCount, kSegmentalCount, fc);

    if (!j.contains("vowel_set")) fail(ErrorKind::MalformedFile, "feature config needs vowel_set");
    fc.vowel_set = label_set(j["vowel_set"], "vowel_set");
    if (fc.vowel_set.empty()) fail(ErrorKind::EmptyClass, "vowel_set is empty");

    if (j.contains("vowel_corners")) {
        const auto corners = j["vowel_corners"];
        if (!corners.is_array() || corners.size() != 3)
            fail(ErrorKind::MalformedFile, "vowel_corners must be an array of 3 strings");
        for (std::size_t i = 0; i < 3; ++i) {
            if (!corners[i].is_string())
                fail(ErrorKind::MalformedFile, "vowel_corners must be an array of 3 strings");
            fc.vowel_corners[i] = nfc(corners[i].get<std::string>());
        }
    }
    for (const auto& corner : fc.vowel_corners)
        if (!fc.vowel_set.contains(corner))
            fail(ErrorKind::MalformedFile, "vowel corner '" + corner + "' is not in vowel_set");
    if (fc.vowel_corners[0] == fc.vowel_corners[1] || fc.vowel_corners[0] == fc.vowel_corners[2] ||
        fc.vowel_corners[1] == fc.vowel_corners[2])
        fail(ErrorKind::MalformedFile, "vowel corners must be distinct");
    return fc;
}

std::string dump_feature_config(const FeatureConfig& fc) {
    json j;
    j["language"] = fc.language;
    json consonant = json::object();
    json vowel = json::object();
    for (std::size_t i = 0; i < kSegmentalCount; ++i) {
        const auto& pc = fc.classes[i];
        if (!pc) continue;
        json entry{{"pos", pc->pos}, {"neg", pc->neg}};
        (i < kConsonantCount ? consonant : vowel)[std::string(feature_name(feature_at(i)))] =
            std::move(entry);
    }
    j["consonant_features"] = std::move(consonant);
    j["vowel_features"] = std::move(vowel);
    j["vowel_corners"] = fc.vowel_corners;
    j["vowel_set"] = fc.vowel_set;
    return j.dump(2) + "\n";
}

FeatureConfigMap load_feature_configs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::MissingFile, dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    FeatureConfigMap out;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(ErrorKind::MissingFile, path.string());
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        FeatureConfig fc = load_feature_config(text);
        const std::string language = fc.language;
        if (!out.emplace(language, std::move(fc)).second)
            fail(ErrorKind::MalformedFile,
                 "two feature configs for language '" + language + "' in " + dir.string());
    }
    return out;
}

} // namespace phonoscope
