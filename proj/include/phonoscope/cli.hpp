#pragma once

// Command-line driver. Configuration is one JSON document; flags override keys.
//
//   phonoscope <validate|profiles|analyze <id>|synth|selftest> --config <path>
//              [--output <dir>] [--seed <u64>] [overrides...]
//
// Exit status: 0 ok, 1 corpus error (or validate found errors), 2 config error,
// 3 analysis error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phonoscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCorpus = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAnalysis = 3;

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path corpus_root;
    std::vector<std::string> backbone_ids;  // empty: every backbone in the manifest
    std::filesystem::path feature_config_dir;
    std::filesystem::path output_dir = "phonoscope-out";
    bool severity_override = false;
    // Precomputed profiles.csv per backbone; when absent, profiles are rebuilt from the corpus.
    std::map<std::string, std::filesystem::path> profiles;
    // Per-analysis parameter objects, kept as canonical JSON text.
    std::map<std::string, std::string> analyses;
    // Synthetic spec object (canonical JSON) for synth and selftest.
    std::optional<std::string> synth;

    // Canonical JSON; its SHA-256 names the run directory.
    std::string canonical() const;
};

// Relative paths resolve against base_dir. Throws Error{ConfigInvalid}.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);

// Accepted analysis ids.
const std::vector<std::string>& analysis_ids();

// Full command-line entry point; returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace phonoscope::cli
