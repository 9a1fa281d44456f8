#include "damf/io.hpp"

#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace damf {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key +
                                ": not an integer: " + value);
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key +
                                ": not a number: " + value);
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key " + key +
                              ": expected true/false: " + value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- binary checkpoint primitives ---

constexpr char kMagic[8] = {'D', 'A', 'M', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

void write_str(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
  auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return s;
}

void write_model_config(std::ostream& out, const ModelConfig& cfg) {
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.encoder.kind));
  write_pod<std::int32_t>(out, cfg.encoder.hidden_size);
  write_pod<std::int32_t>(out, cfg.encoder.max_len);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.encoder.pooling));
  write_pod<std::int32_t>(out, cfg.encoder.num_layers);
  write_pod<std::int32_t>(out, cfg.encoder.ffn_multiplier);
  write_pod<std::int32_t>(out, cfg.num_domains);
  write_pod<std::int32_t>(out, cfg.head_hidden);
  write_pod<double>(out, cfg.dropout_rate);
  write_pod<std::uint8_t>(out, cfg.trans_enabled ? 1 : 0);
}

ModelConfig read_model_config(std::istream& in) {
  ModelConfig cfg;
  cfg.encoder.kind = static_cast<EncoderConfig::Kind>(read_pod<std::uint8_t>(in));
  cfg.encoder.hidden_size = read_pod<std::int32_t>(in);
  cfg.encoder.max_len = read_pod<std::int32_t>(in);
  cfg.encoder.pooling =
      static_cast<EncoderConfig::Pooling>(read_pod<std::uint8_t>(in));
  cfg.encoder.num_layers = read_pod<std::int32_t>(in);
  cfg.encoder.ffn_multiplier = read_pod<std::int32_t>(in);
  cfg.num_domains = read_pod<std::int32_t>(in);
  cfg.head_hidden = read_pod<std::int32_t>(in);
  cfg.dropout_rate = read_pod<double>(in);
  cfg.trans_enabled = read_pod<std::uint8_t>(in) != 0;
  return cfg;
}

void write_params(std::ostream& out, const std::vector<Param*>& params) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    write_str(out, p->name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(Scalar) *
                                           static_cast<std::size_t>(
                                               p->value.size())));
  }
}

void read_params(std::istream& in, const std::vector<Param*>& params) {
  auto count = read_pod<std::uint32_t>(in);
  if (count != params.size()) {
    throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                             std::to_string(count) + ", model expects " +
                             std::to_string(params.size()));
  }
  std::map<std::string, Param*> by_name;
  for (Param* p : params) by_name[p->name] = p;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_str(in);
    auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint has unknown parameter: " + name);
    }
    Param* p = it->second;
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(Scalar) *
                                         static_cast<std::size_t>(
                                             p->value.size())));
    if (!in) throw std::runtime_error("checkpoint truncated in " + name);
    p->grad.setZero();
  }
}

void write_header(std::ostream& out, std::uint8_t kind,
                  std::uint64_t cfg_hash) {
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint8_t>(out, kind);
  write_pod<std::uint64_t>(out, cfg_hash);
}

void write_vocab(std::ostream& out, const Vocabulary& vocab) {
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(vocab.id_to_token.size()));
  for (const std::string& token : vocab.id_to_token) write_str(out, token);
}

Vocabulary read_vocab(std::istream& in) {
  Vocabulary vocab;
  auto count = read_pod<std::uint32_t>(in);
  vocab.id_to_token.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    vocab.id_to_token.push_back(read_str(in));
    vocab.token_to_id[vocab.id_to_token.back()] = static_cast<int>(i);
  }
  return vocab;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t corpus_fingerprint(const Corpus& corpus) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;  // field separator
    h *= 1099511628211ULL;
  };
  mix(corpus.name);
  for (const Document& doc : corpus.documents) {
    mix(doc.id);
    mix(doc.processed_text);
    if (doc.labels) {
      std::string bits(kNumClasses, '0');
      for (int c = 0; c < kNumClasses; ++c) {
        if (doc.labels->flags[static_cast<std::size_t>(c)]) bits[c] = '1';
      }
      mix(bits);
    } else {
      mix("-");
    }
  }
  return h;
}

std::map<std::string, std::string> parse_config_text(
    const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": empty key");
    }
    if (kv.count(key)) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": duplicate key " + key);
    }
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path);
}

std::uint64_t config_hash(const std::map<std::string, std::string>& kv) {
  std::string canon;
  for (const auto& [key, value] : kv) {
    canon += key;
    canon += '=';
    canon += value;
    canon += '\n';
  }
  return fnv1a(canon);
}

ExperimentConfig make_experiment_config(
    const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  TrainOptions& o = cfg.options;
  for (const auto& [key, value] : kv) {
    if (key == "sources") {
      cfg.sources = split_list(value);
    } else if (key == "target") {
      cfg.target = value;
    } else if (key == "model") {
      if (value != "damf" && value != "baseline") {
        throw std::invalid_argument("config key model: unknown value " + value);
      }
      cfg.model_kind = value;
    } else if (key == "hidden_size") {
      o.model.encoder.hidden_size = to_int(key, value);
    } else if (key == "max_len") {
      o.model.encoder.max_len = to_int(key, value);
    } else if (key == "num_layers") {
      o.model.encoder.num_layers = to_int(key, value);
    } else if (key == "ffn_multiplier") {
      o.model.encoder.ffn_multiplier = to_int(key, value);
    } else if (key == "pooling") {
      if (value == "mean") {
        o.model.encoder.pooling = EncoderConfig::Pooling::mean;
      } else if (value == "first_token") {
        o.model.encoder.pooling = EncoderConfig::Pooling::first_token;
      } else {
        throw std::invalid_argument("config key pooling: unknown value " +
                                    value);
      }
    } else if (key == "head_hidden") {
      o.model.head_hidden = to_int(key, value);
    } else if (key == "dropout") {
      o.model.dropout_rate = to_double(key, value);
    } else if (key == "lambda_rec") {
      o.hp.lambda_rec = to_double(key, value);
    } else if (key == "lambda_trans") {
      if (value == "none") {
        o.hp.trans_enabled = false;
        o.hp.lambda_trans = 0.0;
      } else {
        o.hp.trans_enabled = true;
        o.hp.lambda_trans = to_double(key, value);
      }
    } else if (key == "gamma") {
      o.hp.gamma = to_double(key, value);
    } else if (key == "total_epochs") {
      o.total_epochs = to_int(key, value);
    } else if (key == "warmup_epochs") {
      o.warmup_epochs = to_int(key, value);
    } else if (key == "batch_size") {
      o.batch_size = to_int(key, value);
    } else if (key == "lr_init") {
      o.lr_init = to_double(key, value);
    } else if (key == "seed") {
      o.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "use_class_weights") {
      o.use_class_weights = to_bool(key, value);
    } else if (key == "reference") {
      if (value == "warmup_end") {
        o.reference = ReferenceMode::warmup_end;
      } else if (value == "init") {
        o.reference = ReferenceMode::init;
      } else {
        throw std::invalid_argument("config key reference: unknown value " +
                                    value);
      }
    } else if (key == "val_fraction") {
      o.val_fraction = to_double(key, value);
    } else if (key == "probe_iters") {
      o.probe_iters = to_int(key, value);
    } else if (key == "probe_sample_cap") {
      o.probe_sample_cap = to_int(key, value);
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  // trans_enabled rides along inside the model config too
  cfg.options.model.trans_enabled = cfg.options.hp.trans_enabled;
  return cfg;
}

SyntheticSpec make_synthetic_spec(const std::map<std::string, std::string>& kv) {
  SyntheticSpec spec;
  std::map<int, std::vector<double>> priors;
  for (const auto& [key, value] : kv) {
    if (key == "num_domains") {
      spec.num_domains = to_int(key, value);
    } else if (key == "docs_per_domain") {
      spec.docs_per_domain = to_int(key, value);
    } else if (key == "vocab_size") {
      spec.vocab_size = to_int(key, value);
    } else if (key == "domain_marker_strength") {
      spec.domain_marker_strength = to_double(key, value);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key.rfind("prior", 0) == 0) {
      int d = to_int(key, key.substr(5));
      std::vector<double> row;
      for (const std::string& item : split_list(value)) {
        row.push_back(to_double(key, item));
      }
      if (row.size() != static_cast<std::size_t>(kNumClasses)) {
        throw std::invalid_argument("config key " + key + ": expected " +
                                    std::to_string(kNumClasses) + " values");
      }
      priors[d] = row;
    } else {
      throw std::invalid_argument("unknown synthetic spec key: " + key);
    }
  }
  if (spec.num_domains < 1) {
    throw std::invalid_argument("synthetic spec: num_domains must be >= 1");
  }
  spec.per_domain_class_prior = Matrix::Zero(spec.num_domains, kNumClasses);
  for (int d = 0; d < spec.num_domains; ++d) {
    auto it = priors.find(d);
    if (it == priors.end()) {
      throw std::invalid_argument("synthetic spec: missing prior" +
                                  std::to_string(d));
    }
    for (int c = 0; c < kNumClasses; ++c) {
      double p = it->second[static_cast<std::size_t>(c)];
      if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("synthetic spec: prior" +
                                    std::to_string(d) + " out of [0,1]");
      }
      spec.per_domain_class_prior(d, c) = p;
    }
  }
  if (priors.size() != static_cast<std::size_t>(spec.num_domains)) {
    throw std::invalid_argument("synthetic spec: stray prior row");
  }
  return spec;
}

std::string epoch_log_jsonl(const EpochLog& log) {
  json j;
  j["epoch"] = log.epoch;
  j["loss_mf"] = log.loss_mf;
  j["loss_rec"] = log.loss_rec;
  j["loss_trans"] = log.loss_trans;
  j["loss_domain"] = log.loss_domain;
  j["loss_total"] = log.loss_total;
  j["lambda_d"] = log.lambda_d;
  j["lr"] = log.lr;
  j["val_weighted_f1"] = log.val_weighted_f1;
  j["domain_probe_acc"] = log.domain_probe_acc;
  return j.dump();
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  json j;
  j["config_hash"] = manifest.config_hash;
  j["dataset_versions"] = manifest.dataset_versions;
  j["seeds"] = manifest.seeds;
  j["outputs"] = manifest.outputs;
  j["created_at"] =
      manifest.created_at.empty() ? iso_utc_now() : manifest.created_at;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("manifest write failed: " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad manifest " + path + ": " + e.what());
  }
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::uint64_t>();
  m.dataset_versions =
      j.at("dataset_versions").get<std::vector<std::string>>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.created_at = j.at("created_at").get<std::string>();
  return m;
}

void save_checkpoint(const std::string& path, const DamfModel& model,
                     const std::vector<DomainId>& domains,
                     const Vocabulary& vocab, std::uint64_t cfg_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_header(out, 0, cfg_hash);
  write_model_config(out, model.config());
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(domains.size()));
  for (const DomainId& d : domains) {
    write_pod<std::int32_t>(out, d.index);
    write_str(out, d.name);
  }
  write_vocab(out, vocab);
  // params() only hands out mutable pointers; we just read through them
  write_params(out, const_cast<DamfModel&>(model).params());
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void save_checkpoint(const std::string& path, const BaselineModel& model,
                     const Vocabulary& vocab, std::uint64_t cfg_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_header(out, 1, cfg_hash);
  ModelConfig cfg;
  cfg.encoder = model.encoder().config();
  cfg.num_domains = 0;
  cfg.dropout_rate = model.dropout_rate();
  cfg.trans_enabled = false;
  write_model_config(out, cfg);
  write_pod<std::uint32_t>(out, 0);  // no domain registry
  write_vocab(out, vocab);
  write_params(out, const_cast<BaselineModel&>(model).params());
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  auto kind = read_pod<std::uint8_t>(in);
  if (kind > 1) throw std::runtime_error("unknown checkpoint kind");

  CheckpointData data;
  data.kind = kind == 0 ? CheckpointData::Kind::damf
                        : CheckpointData::Kind::baseline;
  data.config_hash = read_pod<std::uint64_t>(in);
  data.model_config = read_model_config(in);

  auto domain_count = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < domain_count; ++i) {
    DomainId d;
    d.index = read_pod<std::int32_t>(in);
    d.name = read_str(in);
    data.domains.push_back(d);
  }
  data.vocab = read_vocab(in);

  if (data.kind == CheckpointData::Kind::damf) {
    data.damf.emplace(data.model_config, data.vocab.size(), 0);
    read_params(in, data.damf->params());
  } else {
    data.baseline.emplace(data.model_config.encoder, data.vocab.size(),
                          data.model_config.dropout_rate, 0);
    read_params(in, data.baseline->params());
  }
  return data;
}

}  // namespace damf
