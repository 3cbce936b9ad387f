#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sciline/embed_space.hpp"
#include "sciline/reception.hpp"
#include "sciline/recombination.hpp"
#include "sciline/synth.hpp"
#include "sciline/twins.hpp"

namespace sciline {

inline const std::vector<std::string> kStages = {"ingest",    "stylize", "disrupt", "recombine",
                                                 "reception", "twins",   "regress", "report"};

struct PipelineConfig {
    std::vector<std::filesystem::path> corpus;
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> contexts;
    std::string schema_version{kSchemaVersion};
    bool dedupe = true;

    std::filesystem::path out_dir = "out";
    std::optional<std::filesystem::path> scores_out;  // default out_dir/scores.csv
    std::optional<std::filesystem::path> tables_dir;  // default out_dir/tables
    std::optional<std::filesystem::path> svg_dir;     // default out_dir/svg

    std::uint64_t seed = 42;
    unsigned threads = 0;
    std::vector<std::string> stages = kStages;

    std::vector<Variant> variants{Variant::knn5};  // the first one drives labels
    RotationOptions rotation;

    int min_citations = 1;
    bool cd_prime_literal = true;
    double damping = 0.85;

    std::optional<int> cutoff_year;
    double threshold = 0.5;
    WalkParams walk;
    std::optional<std::uint64_t> walk_seed;  // default: seed
    bool exclude_without_combos = false;

    ReceptionOptions reception;

    TwinParams twins;
    int sentence_gap = 1;
    double tolerance = 0.05;

    std::vector<std::string> responses{"c5", "c10"};
    std::string model = "auto";  // auto, poisson, ols
    std::vector<std::string> fe{"year", "field"};
};

// Throws Error(config) naming the offending key or path. Relative paths are
// resolved against the directory of the file.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
SynthConfig load_synth_config(const std::filesystem::path& path);

void validate(const PipelineConfig& config);

struct StageRecord {
    std::string stage;
    bool ok = true;
    std::map<std::string, std::string> inputs;  // path -> content hash
    std::string params;                         // compact JSON object
    std::vector<std::string> outputs;           // relative to out_dir
    double duration_ms = 0.0;
    std::string error;
};

struct PipelineResult {
    int exit_code = 0;  // 0 ok, 1 stage failure, 2 invalid config
    std::vector<StageRecord> manifest;
    std::string error;
};

// Runs the requested stages in dependency order and writes manifest.ndjson.
// Stages whose inputs were produced by an earlier invocation read them back
// from out_dir.
PipelineResult run_pipeline(const PipelineConfig& config);

int run_cli(int argc, char** argv);

}  // namespace sciline
