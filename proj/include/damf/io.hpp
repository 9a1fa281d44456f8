#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "damf/model.hpp"
#include "damf/tokenizer.hpp"
#include "damf/training.hpp"
#include "damf/types.hpp"

namespace damf {

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

// Stable content hash over ids, processed text, and labels; used as the
// dataset version stamp in run manifests.
std::uint64_t corpus_fingerprint(const Corpus& corpus);

// Flat "key = value" config files: '#' comments, blank lines skipped,
// duplicate keys rejected.
std::map<std::string, std::string> parse_config_text(
    const std::string& text, const std::string& origin = "<config>");
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Hash of the canonical "key=value\n" rendering (keys sorted).
std::uint64_t config_hash(const std::map<std::string, std::string>& kv);

// A full experiment: which corpora play source/target plus every training
// knob. Unknown keys are errors so typos fail loudly.
struct ExperimentConfig {
  std::vector<std::string> sources;
  std::string target;
  std::string model_kind = "damf";  // "damf" or "baseline"
  TrainOptions options;
};

ExperimentConfig make_experiment_config(
    const std::map<std::string, std::string>& kv);

// SyntheticSpec from the same flat format; per-domain priors are given as
// "prior0 = 0.5,0.3,…" rows of 10 values.
SyntheticSpec make_synthetic_spec(const std::map<std::string, std::string>& kv);

// One epoch log as a single JSON line.
std::string epoch_log_jsonl(const EpochLog& log);

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::vector<std::string> dataset_versions;  // "name:docs=N:fp=hex"
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::string created_at;  // ISO 8601 UTC; filled by write when empty
};

void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest read_manifest(const std::string& path);

// Single-file binary checkpoint: magic, config, domain registry, vocabulary,
// then every named parameter tensor bit for bit. Little-endian host assumed.
void save_checkpoint(const std::string& path, const DamfModel& model,
                     const std::vector<DomainId>& domains,
                     const Vocabulary& vocab, std::uint64_t cfg_hash);
void save_checkpoint(const std::string& path, const BaselineModel& model,
                     const Vocabulary& vocab, std::uint64_t cfg_hash);

struct CheckpointData {
  enum class Kind { damf, baseline };
  Kind kind = Kind::damf;
  std::uint64_t config_hash = 0;
  ModelConfig model_config;
  std::vector<DomainId> domains;  // empty for baseline checkpoints
  Vocabulary vocab;
  std::optional<DamfModel> damf;
  std::optional<BaselineModel> baseline;
};

CheckpointData load_checkpoint(const std::string& path);

}  // namespace damf
