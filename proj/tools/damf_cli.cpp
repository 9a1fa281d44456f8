// damf — train/evaluate moral-foundation classifiers across datasets.
//
// Corpus references resolve against DAMF_DATA_DIR (or the built-in data
// directory): "covid" means "<data dir>/covid.jsonl" unless the reference is
// an existing path. Every command writes its declared outputs plus a run
// manifest and exits 0 only when all of them landed.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "damf/aflite.hpp"
#include "damf/corpus.hpp"
#include "damf/ddr.hpp"
#include "damf/embeddings.hpp"
#include "damf/evaluation.hpp"
#include "damf/io.hpp"
#include "damf/model.hpp"
#include "damf/probe.hpp"
#include "damf/rng.hpp"
#include "damf/synthetic.hpp"
#include "damf/tokenizer.hpp"
#include "damf/training.hpp"
#include "damf/tsne.hpp"
#include "damf/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace damf;

namespace {

std::string data_dir() {
  if (const char* env = std::getenv("DAMF_DATA_DIR")) return env;
  return DAMF_DATA_DIR_DEFAULT;
}

std::string preset_path(const std::string& name) {
  return (fs::path(DAMF_PRESET_DIR_DEFAULT) / (name + ".conf")).string();
}

std::string logical_name(const std::string& ref) {
  std::string stem = fs::path(ref).stem().string();
  return stem.empty() ? ref : stem;
}

std::string resolve_corpus_path(const std::string& ref) {
  if (fs::exists(ref)) return ref;
  fs::path fallback = fs::path(data_dir()) / (ref + ".jsonl");
  if (fs::exists(fallback)) return fallback.string();
  throw std::runtime_error("corpus not found: " + ref + " (also tried " +
                           fallback.string() + ")");
}

Corpus load_named(const std::string& ref, int index) {
  Corpus corpus =
      load_corpus(resolve_corpus_path(ref), DomainId{index, logical_name(ref)});
  corpus.name = logical_name(ref);
  return corpus;
}

void refuse_existing(const std::vector<std::string>& outputs, bool force) {
  if (force) return;
  for (const std::string& path : outputs) {
    if (fs::exists(path)) {
      throw std::runtime_error("output exists: " + path +
                               " (pass --force to overwrite)");
    }
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string dataset_stamp(const Corpus& corpus) {
  return corpus.name + ":docs=" + std::to_string(corpus.documents.size()) +
         ":fp=" + hex64(corpus_fingerprint(corpus));
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

int class_index_or_throw(const std::string& name, const std::string& where) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (name == kClassNames[c]) return c;
  }
  throw std::runtime_error(where + ": unknown class name '" + name + "'");
}

std::vector<std::string> flag_names(const MoralLabelVector& labels) {
  std::vector<std::string> names;
  for (int c = 0; c < kNumClasses; ++c) {
    if (labels.flags[static_cast<std::size_t>(c)]) {
      names.push_back(kClassNames[c]);
    }
  }
  return names;
}

std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> items;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t b = item.find_first_not_of(" \t");
    std::size_t e = item.find_last_not_of(" \t");
    if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
  }
  return items;
}

// ---------------------------------------------------------------- convert --

std::vector<std::string> parse_label_list(std::string joined,
                                          const std::string& where) {
  std::replace(joined.begin(), joined.end(), '|', ',');
  std::vector<std::string> names;
  std::istringstream in(joined);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    std::size_t b = piece.find_first_not_of(" \t");
    std::size_t e = piece.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    piece = piece.substr(b, e - b + 1);
    std::transform(piece.begin(), piece.end(), piece.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (piece == "non-moral" || piece == "nm") continue;  // explicit none
    class_index_or_throw(piece, where);
    names.push_back(piece);
  }
  return names;
}

// MFTC-style annotation export: either a list of tweet objects, an object
// with a "Tweets" array, or a list of corpora each holding "Tweets".
std::string adapt_mftc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }

  std::vector<json> tweets;
  auto collect = [&tweets](const json& node) {
    for (const auto& t : node) tweets.push_back(t);
  };
  if (root.is_array() && !root.empty() && root[0].contains("Tweets")) {
    for (const auto& corpus : root) collect(corpus.at("Tweets"));
  } else if (root.is_array()) {
    collect(root);
  } else if (root.is_object() && root.contains("Tweets")) {
    collect(root.at("Tweets"));
  } else {
    throw std::runtime_error(path + ": unrecognized MFTC export layout");
  }

  std::ostringstream out;
  for (const json& tweet : tweets) {
    json rec;
    const json& id = tweet.at("tweet_id");
    rec["id"] = id.is_string() ? id.get<std::string>() : id.dump();
    rec["text"] = tweet.at("tweet_text").get<std::string>();
    json annotations = json::array();
    for (const auto& ann : tweet.at("annotations")) {
      annotations.push_back(
          parse_label_list(ann.at("annotation").get<std::string>(), path));
    }
    if (annotations.empty()) {
      throw std::runtime_error(path + ": tweet " + rec["id"].get<std::string>() +
                               " has no annotations");
    }
    rec["annotations"] = annotations;
    out << rec.dump() << '\n';
  }
  return out.str();
}

// id<TAB>text<TAB>labels with comma- or pipe-separated canonical names;
// an "id\t..." header line is skipped. Used for the covid and congress dumps.
std::string adapt_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("id\t", 0) == 0) continue;
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected id<TAB>text<TAB>labels");
    }
    json rec;
    rec["id"] = line.substr(0, tab1);
    rec["text"] = line.substr(tab1 + 1, tab2 - tab1 - 1);
    rec["labels"] = parse_label_list(
        line.substr(tab2 + 1), path + ":" + std::to_string(line_no));
    out << rec.dump() << '\n';
  }
  return out.str();
}

// eMFD-style scored segments: one JSON object per line with a per-class
// score map; classes scoring ≥ 0.5 become labels.
std::string adapt_emfd(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    json canon;
    canon["id"] = rec.at("id").get<std::string>();
    canon["text"] = rec.at("text").get<std::string>();
    json labels = json::array();
    for (const auto& [name, score] : rec.at("scores").items()) {
      class_index_or_throw(name, path + ":" + std::to_string(line_no));
      if (score.get<double>() >= 0.5) labels.push_back(name);
    }
    canon["labels"] = labels;
    out << canon.dump() << '\n';
  }
  return out.str();
}

int cmd_convert(const std::string& adapter, const std::string& in_path,
                const std::string& out_path, bool force) {
  if (adapter == "synthetic") {
    SyntheticSpec spec = make_synthetic_spec(parse_config_file(in_path));
    fs::create_directories(out_path);
    std::vector<Corpus> corpora = generate_synthetic_corpus(spec);
    RunManifest manifest;
    manifest.config_hash = config_hash(parse_config_file(in_path));
    manifest.seeds = {spec.seed};
    std::vector<std::string> outputs;
    for (const Corpus& corpus : corpora) {
      outputs.push_back((fs::path(out_path) / (corpus.name + ".jsonl")).string());
    }
    refuse_existing(outputs, force);
    for (std::size_t i = 0; i < corpora.size(); ++i) {
      save_corpus(corpora[i], outputs[i]);
      manifest.dataset_versions.push_back(dataset_stamp(corpora[i]));
      manifest.outputs.push_back(outputs[i]);
      std::cout << corpora[i].name << ": " << corpora[i].documents.size()
                << " docs, " << corpora[i].num_labeled() << " labeled\n";
    }
    write_manifest(manifest, (fs::path(out_path) / "manifest.json").string());
    return 0;
  }

  std::string canonical;
  if (adapter == "mftc") {
    canonical = adapt_mftc(in_path);
  } else if (adapter == "covid" || adapter == "congress") {
    canonical = adapt_tsv(in_path);
  } else if (adapter == "emfd") {
    canonical = adapt_emfd(in_path);
  } else {
    throw std::runtime_error("unknown adapter: " + adapter);
  }

  refuse_existing({out_path}, force);
  {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << canonical;
  }
  // reload to apply voting + preprocessing, then rewrite with final labels
  LoadReport report;
  Corpus corpus = load_corpus(out_path, DomainId{0, logical_name(out_path)},
                              CorpusFormat::jsonl, &report);
  corpus.name = logical_name(out_path);
  save_corpus(corpus, out_path);

  std::cout << "records: " << report.total_records << ", kept: " << report.kept
            << ", discarded (no majority): " << report.discarded_no_majority
            << '\n';

  RunManifest manifest;
  manifest.config_hash = fnv1a(adapter);
  manifest.dataset_versions = {dataset_stamp(corpus)};
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

// ------------------------------------------------------------------ train --

struct LoadedExperiment {
  ExperimentConfig config;
  std::vector<Corpus> sources;
  std::optional<Corpus> target;  // labels stripped
  Vocabulary vocab;
  std::vector<std::string> dataset_versions;
};

LoadedExperiment load_experiment(const ExperimentConfig& config) {
  if (config.sources.empty()) {
    throw std::runtime_error("config must list at least one source corpus");
  }
  if (config.model_kind == "damf" && config.target.empty()) {
    throw std::runtime_error("damf training needs a target corpus");
  }

  LoadedExperiment exp;
  exp.config = config;
  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    exp.sources.push_back(
        load_named(config.sources[i], static_cast<int>(i)));
    exp.dataset_versions.push_back(dataset_stamp(exp.sources.back()));
  }
  std::vector<const Corpus*> vocab_corpora;
  for (const Corpus& c : exp.sources) vocab_corpora.push_back(&c);
  if (!config.target.empty()) {
    Corpus target =
        load_named(config.target, static_cast<int>(config.sources.size()));
    exp.dataset_versions.push_back(dataset_stamp(target));
    exp.target = strip_labels(target);
    exp.target->name = target.name;
  }
  if (exp.target) vocab_corpora.push_back(&*exp.target);
  exp.vocab = Vocabulary::build(vocab_corpora);
  return exp;
}

// one seed's artifacts under dir/
std::map<std::string, Scalar> run_train_once(
    const LoadedExperiment& exp, std::uint64_t cfg_hash, std::uint64_t seed,
    const std::string& dir) {
  fs::create_directories(dir);
  const std::string log_path = (fs::path(dir) / "log.jsonl").string();
  const std::string ckpt_path = (fs::path(dir) / "model.ckpt").string();
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();

  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write " + log_path);
  auto on_epoch = [&log](const EpochLog& entry) {
    log << epoch_log_jsonl(entry) << '\n';
    log.flush();
  };

  TrainOptions opts = exp.config.options;
  opts.seed = seed;

  int best_epoch = -1;
  Scalar best_f1 = 0.0;
  if (exp.config.model_kind == "baseline") {
    BaselineResult result =
        train_baseline(exp.sources, exp.vocab, opts, on_epoch);
    save_checkpoint(ckpt_path, result.model, exp.vocab, cfg_hash);
    best_epoch = result.best_epoch;
    best_f1 = result.best_val_f1;
  } else {
    TrainResult result =
        train_damf(exp.sources, *exp.target, exp.vocab, opts, on_epoch);
    save_checkpoint(ckpt_path, result.model, result.domains, exp.vocab,
                    cfg_hash);
    best_epoch = result.best_epoch;
    best_f1 = result.best_val_f1;
  }

  RunManifest manifest;
  manifest.config_hash = cfg_hash;
  manifest.dataset_versions = exp.dataset_versions;
  manifest.seeds = {seed};
  manifest.outputs = {ckpt_path, log_path};
  write_manifest(manifest, manifest_path);

  std::cout << "seed " << seed << ": best val weighted F1 " << best_f1
            << " at epoch " << best_epoch << '\n';
  return {{"best_val_f1", best_f1},
          {"best_epoch", static_cast<Scalar>(best_epoch)}};
}

int cmd_train(const std::string& config_path, const std::string& preset,
              const std::string& model_flag, std::int64_t seed_flag,
              const std::string& seeds_flag, const std::string& out_dir,
              bool force) {
  if ((config_path.empty()) == (preset.empty())) {
    throw std::runtime_error("pass exactly one of --config or --preset");
  }
  std::string path = config_path.empty() ? preset_path(preset) : config_path;
  auto kv = parse_config_file(path);
  if (!model_flag.empty()) kv["model"] = model_flag;

  std::vector<std::uint64_t> seeds;
  if (!seeds_flag.empty()) {
    for (const std::string& s : split_csv(seeds_flag)) {
      seeds.push_back(std::stoull(s));
    }
    if (seeds.size() < 2) {
      throw std::runtime_error("--seeds wants at least two comma-separated");
    }
  } else if (seed_flag >= 0) {
    seeds = {static_cast<std::uint64_t>(seed_flag)};
  } else if (kv.count("seed")) {
    seeds = {std::stoull(kv.at("seed"))};
  } else {
    seeds = {0};
  }

  const bool sweep = seeds.size() > 1;
  std::vector<std::string> declared;
  for (std::uint64_t s : seeds) {
    fs::path dir = sweep ? fs::path(out_dir) / ("seed" + std::to_string(s))
                         : fs::path(out_dir);
    declared.push_back((dir / "model.ckpt").string());
    declared.push_back((dir / "log.jsonl").string());
  }
  if (sweep) declared.push_back((fs::path(out_dir) / "aggregate.json").string());
  refuse_existing(declared, force);

  // the first seed stands in while loading; per-run hash pins the real one
  kv["seed"] = std::to_string(seeds.front());
  LoadedExperiment exp = load_experiment(make_experiment_config(kv));

  std::vector<std::map<std::string, Scalar>> metrics;
  for (std::uint64_t s : seeds) {
    kv["seed"] = std::to_string(s);
    fs::path dir = sweep ? fs::path(out_dir) / ("seed" + std::to_string(s))
                         : fs::path(out_dir);
    metrics.push_back(run_train_once(exp, config_hash(kv), s, dir.string()));
  }

  if (sweep) {
    SeedAggregate agg = aggregate_seeds(metrics);
    json j;
    for (const auto& [key, mean] : agg.mean) {
      j[key] = {{"mean", mean}, {"stddev", agg.stddev.at(key)}};
    }
    const std::string agg_path =
        (fs::path(out_dir) / "aggregate.json").string();
    write_json_file(j, agg_path);

    kv.erase("seed");
    RunManifest manifest;
    manifest.config_hash = config_hash(kv);
    manifest.dataset_versions = exp.dataset_versions;
    manifest.seeds = seeds;
    manifest.outputs = declared;
    write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    std::cout << "aggregate best val weighted F1: "
              << agg.mean.at("best_val_f1") << " ± "
              << agg.stddev.at("best_val_f1") << '\n';
  }
  return 0;
}

// --------------------------------------------------------------- evaluate --

json report_json(const std::string& model_kind, const std::string& test_name,
                 const ClassReport& report, Scalar wf1) {
  json j;
  j["model"] = model_kind;
  j["test"] = test_name;
  j["weighted_f1"] = wf1;
  json classes = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    classes.push_back({{"class", kClassNames[c]},
                       {"precision", report.precision[static_cast<std::size_t>(c)]},
                       {"recall", report.recall[static_cast<std::size_t>(c)]},
                       {"f1", report.f1[static_cast<std::size_t>(c)]},
                       {"support", report.support[static_cast<std::size_t>(c)]}});
  }
  j["classes"] = classes;
  return j;
}

void print_report(const ClassReport& report, Scalar wf1) {
  std::printf("%-12s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1",
              "support");
  for (int c = 0; c < kNumClasses; ++c) {
    const auto i = static_cast<std::size_t>(c);
    std::printf("%-12s %9.4f %9.4f %9.4f %9ld\n", kClassNames[c],
                report.precision[i], report.recall[i], report.f1[i],
                report.support[i]);
  }
  std::printf("weighted F1: %.4f\n", wf1);
}

struct Scorer {
  std::string kind;
  std::function<Vector(const Document&)> logits;
};

Scorer checkpoint_scorer(const std::string& ckpt_path,
                         const std::string& domain_flag,
                         const std::string& test_name) {
  auto data = std::make_shared<CheckpointData>(load_checkpoint(ckpt_path));
  if (data->kind == CheckpointData::Kind::baseline) {
    return {"baseline", [data](const Document& doc) {
              TokenSequence seq =
                  tokenize_truncate(doc.processed_text,
                                    data->baseline->encoder().config(),
                                    data->vocab);
              return data->baseline->predict(seq);
            }};
  }

  // pick the domain embedding: explicit flag, else the test corpus's own
  // registry entry, else the registry tail (the training-time target)
  DomainId domain;
  bool found = false;
  const std::string wanted = domain_flag.empty() ? test_name : domain_flag;
  for (const DomainId& d : data->domains) {
    if (d.name == wanted) {
      domain = d;
      found = true;
    }
  }
  if (!found) {
    if (!domain_flag.empty()) {
      throw std::runtime_error("domain '" + domain_flag +
                               "' not in checkpoint registry");
    }
    if (data->domains.empty()) {
      throw std::runtime_error("checkpoint has an empty domain registry");
    }
    domain = data->domains.back();
    std::cout << "note: '" << test_name
              << "' not in the domain registry; using '" << domain.name
              << "'\n";
  }
  return {"damf", [data, domain](const Document& doc) {
            TokenSequence seq = tokenize_truncate(
                doc.processed_text, data->damf->config().encoder, data->vocab);
            return data->damf->mf_forward(
                data->damf->transform(data->damf->encode(seq)), domain);
          }};
}

Scorer ddr_scorer(const std::string& lexicon_path,
                  const std::string& embeddings_path) {
  auto embeddings = std::make_shared<EmbeddingTable>(
      EmbeddingTable::load_word2vec_text(embeddings_path));
  std::vector<std::string> skipped;
  auto centroids = std::make_shared<CentroidTable>(build_centroids(
      Lexicon::load(lexicon_path), *embeddings, &skipped));
  if (!skipped.empty()) {
    std::cout << "lexicon: skipped " << skipped.size()
              << " out-of-vocabulary words\n";
  }
  return {"ddr", [embeddings, centroids](const Document& doc) {
            return ddr_pseudo_logits(
                ddr_predict(doc.processed_text, *centroids, *embeddings));
          }};
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& lexicon_path,
                 const std::string& embeddings_path,
                 const std::string& test_ref, const std::string& domain_flag,
                 const std::string& out_dir, bool force) {
  const bool use_ddr = !lexicon_path.empty() || !embeddings_path.empty();
  if (use_ddr == !ckpt_path.empty()) {
    throw std::runtime_error(
        "pass either --checkpoint or both --lexicon and --embeddings");
  }
  if (use_ddr && (lexicon_path.empty() || embeddings_path.empty())) {
    throw std::runtime_error("ddr evaluation needs --lexicon and --embeddings");
  }

  Corpus test = load_named(test_ref, 0);
  std::vector<const Document*> labeled;
  for (const Document& doc : test.documents) {
    if (doc.labels) labeled.push_back(&doc);
  }
  if (labeled.empty()) {
    throw std::runtime_error("corpus " + test.name +
                             " has no labeled documents to score");
  }

  Scorer scorer = use_ddr ? ddr_scorer(lexicon_path, embeddings_path)
                          : checkpoint_scorer(ckpt_path, domain_flag, test.name);

  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  const std::string preds_path =
      (fs::path(out_dir) / "predictions.jsonl").string();
  refuse_existing({report_path, preds_path}, force);
  fs::create_directories(out_dir);

  PredictionSet preds;
  preds.logits = Matrix(static_cast<Eigen::Index>(labeled.size()), kNumClasses);
  preds.gold = Matrix::Zero(static_cast<Eigen::Index>(labeled.size()),
                            kNumClasses);
  std::ofstream preds_out(preds_path);
  if (!preds_out) throw std::runtime_error("cannot write " + preds_path);
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const Document& doc = *labeled[i];
    Vector logits = scorer.logits(doc);
    preds.logits.row(static_cast<Eigen::Index>(i)) = logits.transpose();
    for (int c = 0; c < kNumClasses; ++c) {
      preds.gold(static_cast<Eigen::Index>(i), c) =
          doc.labels->flags[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
    }
    json rec;
    rec["id"] = doc.id;
    rec["predicted"] = flag_names(binarize(logits));
    rec["gold"] = flag_names(*doc.labels);
    preds_out << rec.dump() << '\n';
  }

  ClassReport report = per_class_prf(preds);
  Scalar wf1 = weighted_f1(report);
  write_json_file(report_json(scorer.kind, test.name, report, wf1),
                  report_path);
  print_report(report, wf1);

  RunManifest manifest;
  manifest.config_hash = fnv1a(scorer.kind + ":" + test.name);
  manifest.dataset_versions = {dataset_stamp(test)};
  manifest.outputs = {report_path, preds_path};
  write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return 0;
}

// ----------------------------------------------------------------- aflite --

int cmd_filter_aflite(const std::string& corpus_ref, const std::string& out_dir,
                      AFLiteConfig cfg, std::uint64_t seed,
                      std::uint64_t encoder_seed, bool force) {
  Corpus corpus = load_named(corpus_ref, 0);
  std::vector<const Document*> labeled;
  for (const Document& doc : corpus.documents) {
    if (doc.labels) labeled.push_back(&doc);
  }
  if (labeled.empty()) {
    throw std::runtime_error("corpus " + corpus.name +
                             " has no labeled documents to filter");
  }
  if (labeled.size() < corpus.documents.size()) {
    std::cout << "skipping " << corpus.documents.size() - labeled.size()
              << " unlabeled docs\n";
  }

  const std::string filtered_path =
      (fs::path(out_dir) / "filtered.jsonl").string();
  const std::string log_path = (fs::path(out_dir) / "removal.json").string();
  refuse_existing({filtered_path, log_path}, force);
  fs::create_directories(out_dir);

  // frozen reference encoder: fixed random init, never trained
  Vocabulary vocab = Vocabulary::build({&corpus});
  EncoderConfig enc_cfg;
  TinyTransformer encoder(enc_cfg, vocab.size(), encoder_seed);

  Matrix features(static_cast<Eigen::Index>(labeled.size()),
                  enc_cfg.hidden_size);
  Matrix gold = Matrix::Zero(static_cast<Eigen::Index>(labeled.size()),
                             kNumClasses);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    TokenSequence seq =
        tokenize_truncate(labeled[i]->processed_text, enc_cfg, vocab);
    features.row(static_cast<Eigen::Index>(i)) =
        encoder.encode(seq).transpose();
    for (int c = 0; c < kNumClasses; ++c) {
      gold(static_cast<Eigen::Index>(i), c) =
          labeled[i]->labels->flags[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
    }
    ids.push_back(labeled[i]->id);
  }
  // probe GD inside the filter assumes unit-scale features
  features = standardize_columns(features, column_stats(features));

  AFLiteResult result = aflite_filter(features, gold, ids, cfg, seed);

  Corpus filtered;
  filtered.name = corpus.name + "_filtered";
  filtered.domain = corpus.domain;
  for (int idx : result.kept_indices) {
    filtered.documents.push_back(*labeled[static_cast<std::size_t>(idx)]);
  }
  filtered.label_counts = count_labels(filtered.documents);
  save_corpus(filtered, filtered_path);

  std::cout << "sizes: " << labeled.size();
  for (std::size_t s : result.sizes) std::cout << " -> " << s;
  std::cout << " (" << result.rounds << " rounds)\n";

  json j;
  j["initial"] = labeled.size();
  j["sizes"] = result.sizes;
  j["rounds"] = result.rounds;
  j["kept"] = result.kept_ids.size();
  write_json_file(j, log_path);

  RunManifest manifest;
  manifest.config_hash = fnv1a("aflite:" + corpus.name);
  manifest.dataset_versions = {dataset_stamp(corpus)};
  manifest.seeds = {seed, encoder_seed};
  manifest.outputs = {filtered_path, log_path};
  write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return 0;
}

// -------------------------------------------------------------------- ddr --

int cmd_ddr(const std::string& lexicon_path, const std::string& embeddings_path,
            const std::string& corpus_ref, const std::string& out_dir,
            bool force) {
  Corpus corpus = load_named(corpus_ref, 0);
  EmbeddingTable embeddings =
      EmbeddingTable::load_word2vec_text(embeddings_path);
  std::vector<std::string> skipped;
  CentroidTable centroids =
      build_centroids(Lexicon::load(lexicon_path), embeddings, &skipped);
  if (!skipped.empty()) {
    std::cout << "lexicon: skipped " << skipped.size()
              << " out-of-vocabulary words\n";
  }

  const std::string preds_path =
      (fs::path(out_dir) / "predictions.jsonl").string();
  refuse_existing({preds_path}, force);
  fs::create_directories(out_dir);

  std::ofstream out(preds_path);
  if (!out) throw std::runtime_error("cannot write " + preds_path);
  int abstained = 0;
  for (const Document& doc : corpus.documents) {
    DdrPrediction pred = ddr_predict(doc.processed_text, centroids, embeddings);
    json rec;
    rec["id"] = doc.id;
    if (pred.abstained) {
      rec["class"] = nullptr;
      ++abstained;
    } else {
      rec["class"] = kClassNames[pred.class_index];
    }
    std::vector<Scalar> scores(pred.scores.data(),
                               pred.scores.data() + pred.scores.size());
    rec["scores"] = scores;
    out << rec.dump() << '\n';
  }
  std::cout << corpus.documents.size() << " docs scored, " << abstained
            << " abstentions\n";

  RunManifest manifest;
  manifest.config_hash = fnv1a("ddr:" + corpus.name);
  manifest.dataset_versions = {dataset_stamp(corpus)};
  manifest.outputs = {preds_path};
  write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return 0;
}

// ------------------------------------------------------------------- tsne --

int cmd_tsne(const std::string& corpora_flag, int sample,
             const std::string& out_path, const std::string& ckpt_path,
             const std::string& features, std::uint64_t seed,
             Scalar perplexity, int iters, std::uint64_t encoder_seed,
             bool force) {
  std::vector<std::string> refs = split_csv(corpora_flag);
  if (refs.size() < 2) {
    throw std::runtime_error("--corpora wants at least two corpus names");
  }
  refuse_existing({out_path}, force);

  std::vector<Corpus> corpora;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    corpora.push_back(load_named(refs[i], static_cast<int>(i)));
  }
  std::vector<const Corpus*> ptrs;
  for (const Corpus& c : corpora) ptrs.push_back(&c);

  std::function<Vector(const Document&)> embed;
  std::shared_ptr<CheckpointData> ckpt;
  std::shared_ptr<TinyTransformer> fresh;
  std::shared_ptr<Vocabulary> vocab;
  if (!ckpt_path.empty()) {
    ckpt = std::make_shared<CheckpointData>(load_checkpoint(ckpt_path));
    if (ckpt->kind == CheckpointData::Kind::baseline) {
      embed = [ckpt](const Document& doc) {
        TokenSequence seq = tokenize_truncate(
            doc.processed_text, ckpt->baseline->encoder().config(),
            ckpt->vocab);
        return ckpt->baseline->encoder().encode(seq);
      };
    } else {
      const bool transformed = features != "encoded";
      embed = [ckpt, transformed](const Document& doc) {
        TokenSequence seq = tokenize_truncate(
            doc.processed_text, ckpt->damf->config().encoder, ckpt->vocab);
        Vector x = ckpt->damf->encode(seq);
        return transformed ? ckpt->damf->transform(x) : x;
      };
    }
  } else {
    // no model: frozen random reference encoder over a shared vocabulary
    vocab = std::make_shared<Vocabulary>(Vocabulary::build(ptrs));
    EncoderConfig enc_cfg;
    fresh = std::make_shared<TinyTransformer>(enc_cfg, vocab->size(),
                                              encoder_seed);
    embed = [fresh, vocab](const Document& doc) {
      TokenSequence seq = tokenize_truncate(doc.processed_text,
                                            fresh->config(), *vocab);
      return fresh->encode(seq);
    };
  }

  TsneConfig cfg;
  cfg.perplexity = perplexity;
  cfg.iters = iters;
  auto points = tsne_points(ptrs, embed, sample, seed, cfg);
  export_tsne(points, out_path);
  std::cout << "wrote " << points.size() << " coordinate rows to " << out_path
            << '\n';

  RunManifest manifest;
  manifest.config_hash = fnv1a("tsne:" + corpora_flag);
  for (const Corpus& c : corpora) {
    manifest.dataset_versions.push_back(dataset_stamp(c));
  }
  manifest.seeds = {seed};
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

// -------------------------------------------------------------- label-dist --

int cmd_label_dist(const std::string& corpus_ref, const std::string& out_path,
                   bool force) {
  Corpus corpus = load_named(corpus_ref, 0);
  refuse_existing({out_path}, force);
  Vector dist = compute_label_distribution(corpus);

  json j;
  j["corpus"] = corpus.name;
  j["labeled_docs"] = corpus.num_labeled();
  json fractions;
  for (int c = 0; c < kNumClasses; ++c) fractions[kClassNames[c]] = dist(c);
  j["fractions"] = fractions;
  write_json_file(j, out_path);

  for (int c = 0; c < kNumClasses; ++c) {
    std::printf("%-12s %.4f\n", kClassNames[c], dist(c));
  }

  RunManifest manifest;
  manifest.config_hash = fnv1a("label-dist:" + corpus.name);
  manifest.dataset_versions = {dataset_stamp(corpus)};
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

// ----------------------------------------------------------------- report --

int cmd_report(const std::string& inputs_flag, const std::string& out_path,
               bool force) {
  std::vector<std::string> inputs = split_csv(inputs_flag);
  if (inputs.size() < 2) {
    throw std::runtime_error("--inputs wants at least two report files");
  }
  refuse_existing({out_path}, force);

  std::vector<std::map<std::string, Scalar>> runs;
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    json j;
    in >> j;
    std::map<std::string, Scalar> metrics;
    metrics["weighted_f1"] = j.at("weighted_f1").get<Scalar>();
    for (const auto& cls : j.at("classes")) {
      metrics["f1_" + cls.at("class").get<std::string>()] =
          cls.at("f1").get<Scalar>();
    }
    runs.push_back(std::move(metrics));
  }

  SeedAggregate agg = aggregate_seeds(runs);
  json j;
  for (const auto& [key, mean] : agg.mean) {
    j[key] = {{"mean", mean}, {"stddev", agg.stddev.at(key)}};
  }
  write_json_file(j, out_path);
  std::printf("weighted_f1: %.4f ± %.4f over %zu runs\n",
              agg.mean.at("weighted_f1"), agg.stddev.at("weighted_f1"),
              runs.size());

  RunManifest manifest;
  manifest.config_hash = fnv1a("report:" + inputs_flag);
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moral-foundation classifiers across heterogeneous datasets"};
  app.require_subcommand(1);

  int exit_code = 0;
  auto guard = [&exit_code](auto&& fn) {
    try {
      exit_code = fn();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      exit_code = 1;
    }
  };

  // convert
  auto* convert = app.add_subcommand("convert", "raw dataset -> corpus file");
  std::string cv_adapter, cv_in, cv_out;
  bool cv_force = false;
  convert->add_option("--adapter", cv_adapter,
                      "mftc, covid, congress, emfd, or synthetic")
      ->required();
  convert->add_option("--in", cv_in, "raw input (spec file for synthetic)")
      ->required();
  convert->add_option("--out", cv_out,
                      "corpus file (directory for synthetic)")
      ->required();
  convert->add_flag("--force", cv_force, "overwrite existing outputs");
  convert->callback([&] {
    guard([&] { return cmd_convert(cv_adapter, cv_in, cv_out, cv_force); });
  });

  // train
  auto* train = app.add_subcommand("train", "train damf or the baseline");
  std::string tr_config, tr_preset, tr_model, tr_seeds, tr_out;
  std::int64_t tr_seed = -1;
  bool tr_force = false;
  train->add_option("--config", tr_config, "experiment config file");
  train->add_option("--preset", tr_preset, "preset name, e.g. row8_covid_to_congress");
  train->add_option("--model", tr_model, "damf (default) or baseline")
      ->check(CLI::IsMember({"", "damf", "baseline"}));
  train->add_option("--seed", tr_seed, "single-seed override");
  train->add_option("--seeds", tr_seeds, "comma list for a sweep");
  train->add_option("--out", tr_out, "run directory")->required();
  train->add_flag("--force", tr_force, "overwrite existing outputs");
  train->callback([&] {
    guard([&] {
      return cmd_train(tr_config, tr_preset, tr_model, tr_seed, tr_seeds,
                       tr_out, tr_force);
    });
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a corpus");
  std::string ev_ckpt, ev_lexicon, ev_embeddings, ev_test, ev_domain, ev_out;
  bool ev_force = false;
  evaluate->add_option("--checkpoint", ev_ckpt, "model checkpoint");
  evaluate->add_option("--lexicon", ev_lexicon, "DDR lexicon file");
  evaluate->add_option("--embeddings", ev_embeddings,
                       "DDR static word vectors");
  evaluate->add_option("--test", ev_test, "test corpus")->required();
  evaluate->add_option("--domain", ev_domain,
                       "registry domain for the domain embedding");
  evaluate->add_option("--out", ev_out, "output directory")->required();
  evaluate->add_flag("--force", ev_force, "overwrite existing outputs");
  evaluate->callback([&] {
    guard([&] {
      return cmd_evaluate(ev_ckpt, ev_lexicon, ev_embeddings, ev_test,
                          ev_domain, ev_out, ev_force);
    });
  });

  // filter-aflite
  auto* aflite = app.add_subcommand("filter-aflite",
                                    "adversarially filter a corpus");
  std::string af_corpus, af_out;
  AFLiteConfig af_cfg;
  std::uint64_t af_seed = 0, af_encoder_seed = 0;
  bool af_force = false;
  aflite->add_option("--corpus", af_corpus, "corpus to filter")->required();
  aflite->add_option("--out", af_out, "output directory")->required();
  aflite->add_option("--partitions", af_cfg.num_partitions, "m");
  aflite->add_option("--train-fraction", af_cfg.train_fraction, "");
  aflite->add_option("--threshold", af_cfg.predictability_threshold, "τ");
  aflite->add_option("--max-remove", af_cfg.max_remove_per_round,
                     "k (0 = 5% of current size)");
  aflite->add_option("--min-size", af_cfg.min_size_fraction, "");
  aflite->add_option("--min-delta", af_cfg.min_delta_fraction, "");
  aflite->add_option("--probe-iters", af_cfg.probe.iters, "");
  aflite->add_option("--seed", af_seed, "");
  aflite->add_option("--encoder-seed", af_encoder_seed,
                     "frozen reference encoder init");
  aflite->add_flag("--force", af_force, "overwrite existing outputs");
  aflite->callback([&] {
    guard([&] {
      return cmd_filter_aflite(af_corpus, af_out, af_cfg, af_seed,
                               af_encoder_seed, af_force);
    });
  });

  // ddr
  auto* ddr = app.add_subcommand("ddr", "lexicon-centroid predictions");
  std::string dd_lexicon, dd_embeddings, dd_corpus, dd_out;
  bool dd_force = false;
  ddr->add_option("--lexicon", dd_lexicon, "")->required();
  ddr->add_option("--embeddings", dd_embeddings, "")->required();
  ddr->add_option("--corpus", dd_corpus, "")->required();
  ddr->add_option("--out", dd_out, "output directory")->required();
  ddr->add_flag("--force", dd_force, "overwrite existing outputs");
  ddr->callback([&] {
    guard([&] {
      return cmd_ddr(dd_lexicon, dd_embeddings, dd_corpus, dd_out, dd_force);
    });
  });

  // tsne
  auto* tsne = app.add_subcommand("tsne", "2-D feature coordinates");
  std::string ts_corpora, ts_out, ts_ckpt, ts_features = "transformed";
  int ts_sample = 500, ts_iters = 500;
  Scalar ts_perplexity = 30.0;
  std::uint64_t ts_seed = 0, ts_encoder_seed = 0;
  bool ts_force = false;
  tsne->add_option("--corpora", ts_corpora, "comma list of corpora")
      ->required();
  tsne->add_option("--sample", ts_sample, "docs per corpus");
  tsne->add_option("--out", ts_out, "csv output")->required();
  tsne->add_option("--checkpoint", ts_ckpt, "model for the features");
  tsne->add_option("--features", ts_features,
                   "transformed (default) or encoded")
      ->check(CLI::IsMember({"transformed", "encoded"}));
  tsne->add_option("--seed", ts_seed, "");
  tsne->add_option("--perplexity", ts_perplexity, "");
  tsne->add_option("--iters", ts_iters, "");
  tsne->add_option("--encoder-seed", ts_encoder_seed,
                   "frozen reference encoder init (no checkpoint)");
  tsne->add_flag("--force", ts_force, "overwrite existing outputs");
  tsne->callback([&] {
    guard([&] {
      return cmd_tsne(ts_corpora, ts_sample, ts_out, ts_ckpt, ts_features,
                      ts_seed, ts_perplexity, ts_iters, ts_encoder_seed,
                      ts_force);
    });
  });

  // label-dist
  auto* dist = app.add_subcommand("label-dist", "per-class label fractions");
  std::string ld_corpus, ld_out;
  bool ld_force = false;
  dist->add_option("--corpus", ld_corpus, "")->required();
  dist->add_option("--out", ld_out, "json output")->required();
  dist->add_flag("--force", ld_force, "overwrite existing outputs");
  dist->callback([&] {
    guard([&] { return cmd_label_dist(ld_corpus, ld_out, ld_force); });
  });

  // report
  auto* report = app.add_subcommand("report", "aggregate evaluation reports");
  std::string rp_inputs, rp_out;
  bool rp_force = false;
  report->add_option("--inputs", rp_inputs, "comma list of report.json files")
      ->required();
  report->add_option("--out", rp_out, "json output")->required();
  report->add_flag("--force", rp_force, "overwrite existing outputs");
  report->callback([&] {
    guard([&] { return cmd_report(rp_inputs, rp_out, rp_force); });
  });

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
