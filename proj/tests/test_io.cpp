#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "damf/io.hpp"
#include "damf/rng.hpp"
#include "json.hpp"

using namespace damf;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path(name) {}
  TempFile(const std::string& name, const std::string& content) : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

Vocabulary toy_vocab(int extra_words) {
  Vocabulary v;
  v.id_to_token = {"<pad>", "<unk>", "<cls>"};
  for (int i = 0; i < extra_words; ++i) {
    v.id_to_token.push_back("word" + std::to_string(i));
  }
  for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
    v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
  }
  return v;
}

TokenSequence toy_seq(int max_len) {
  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), Vocabulary::kPadId);
  seq.ids[0] = Vocabulary::kClsId;
  seq.ids[1] = 3;
  seq.ids[2] = 5;
  seq.ids[3] = 4;
  seq.length = 4;
  return seq;
}

}  // namespace

TEST_CASE("fnv1a matches the published test vectors") {
  CHECK(fnv1a("") == 14695981039346656037ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a("ab") != fnv1a("ba"));
}

TEST_CASE("config parsing trims, skips comments, and rejects junk") {
  auto kv = parse_config_text(
      "# experiment\n"
      "\n"
      "  batch_size = 64   # inline\n"
      "target=synthC\n"
      "sources = synthA , synthB\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv["batch_size"] == "64");
  CHECK(kv["target"] == "synthC");
  CHECK(kv["sources"] == "synthA , synthB");

  CHECK_THROWS_WITH(parse_config_text("a = 1\na = 2\n"),
                    doctest::Contains("duplicate key"));
  CHECK_THROWS_WITH(parse_config_text("just some words\n"),
                    doctest::Contains("key = value"));
  CHECK_THROWS_WITH(parse_config_text("= 5\n"), doctest::Contains("empty key"));
  CHECK_THROWS(parse_config_file("/nonexistent/experiment.conf"));

  TempFile f("test_io_cfg.conf", "seed = 7\n");
  auto from_file = parse_config_file(f.path);
  CHECK(from_file.at("seed") == "7");
}

TEST_CASE("config hash is canonical over key order and value sensitive") {
  auto a = parse_config_text("x = 1\ny = 2\n");
  auto b = parse_config_text("y = 2\nx = 1\n");
  CHECK(config_hash(a) == config_hash(b));
  auto c = parse_config_text("x = 1\ny = 3\n");
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash({}) == fnv1a(""));
}

TEST_CASE("experiment config covers every knob and rejects typos") {
  auto kv = parse_config_text(
      "sources = synthA, synthB\n"
      "target = synthC\n"
      "hidden_size = 16\n"
      "max_len = 24\n"
      "num_layers = 1\n"
      "ffn_multiplier = 3\n"
      "pooling = first_token\n"
      "head_hidden = 8\n"
      "dropout = 0.25\n"
      "lambda_rec = 0.5\n"
      "lambda_trans = 0.1\n"
      "gamma = 10\n"
      "total_epochs = 40\n"
      "warmup_epochs = 10\n"
      "batch_size = 32\n"
      "lr_init = 0.001\n"
      "seed = 3\n"
      "use_class_weights = false\n"
      "reference = init\n"
      "val_fraction = 0.25\n"
      "probe_iters = 120\n"
      "probe_sample_cap = 64\n");
  ExperimentConfig cfg = make_experiment_config(kv);
  REQUIRE(cfg.sources.size() == 2);
  CHECK(cfg.sources[0] == "synthA");
  CHECK(cfg.sources[1] == "synthB");
  CHECK(cfg.target == "synthC");
  const TrainOptions& o = cfg.options;
  CHECK(o.model.encoder.hidden_size == 16);
  CHECK(o.model.encoder.max_len == 24);
  CHECK(o.model.encoder.num_layers == 1);
  CHECK(o.model.encoder.ffn_multiplier == 3);
  CHECK(o.model.encoder.pooling == EncoderConfig::Pooling::first_token);
  CHECK(o.model.head_hidden == 8);
  CHECK(o.model.dropout_rate == 0.25);
  CHECK(o.model.trans_enabled);
  CHECK(o.hp.lambda_rec == 0.5);
  CHECK(o.hp.lambda_trans == 0.1);
  CHECK(o.hp.trans_enabled);
  CHECK(o.hp.gamma == 10.0);
  CHECK(o.total_epochs == 40);
  CHECK(o.warmup_epochs == 10);
  CHECK(o.batch_size == 32);
  CHECK(o.lr_init == 0.001);
  CHECK(o.seed == 3);
  CHECK(!o.use_class_weights);
  CHECK(o.reference == ReferenceMode::init);
  CHECK(o.val_fraction == 0.25);
  CHECK(o.probe_iters == 120);
  CHECK(o.probe_sample_cap == 64);

  auto no_trans = parse_config_text("lambda_trans = none\n");
  ExperimentConfig nt = make_experiment_config(no_trans);
  CHECK(!nt.options.hp.trans_enabled);
  CHECK(!nt.options.model.trans_enabled);
  CHECK(nt.options.hp.lambda_trans == 0.0);
  CHECK(nt.model_kind == "damf");

  ExperimentConfig bl =
      make_experiment_config(parse_config_text("model = baseline\n"));
  CHECK(bl.model_kind == "baseline");
  CHECK_THROWS(make_experiment_config(parse_config_text("model = svm\n")));

  CHECK_THROWS_WITH(
      make_experiment_config(parse_config_text("lamda_rec = 1\n")),
      doctest::Contains("unknown config key"));
  CHECK_THROWS(make_experiment_config(parse_config_text("batch_size = two\n")));
  CHECK_THROWS(make_experiment_config(parse_config_text("lr_init = fast\n")));
  CHECK_THROWS(
      make_experiment_config(parse_config_text("use_class_weights = yep\n")));
  CHECK_THROWS(make_experiment_config(parse_config_text("pooling = max\n")));
  CHECK_THROWS(make_experiment_config(parse_config_text("reference = end\n")));
}

TEST_CASE("synthetic specs parse priors row by row") {
  auto kv = parse_config_text(
      "num_domains = 2\n"
      "docs_per_domain = 50\n"
      "vocab_size = 120\n"
      "domain_marker_strength = 0.8\n"
      "seed = 5\n"
      "prior0 = 0.9, 0.1, 0, 0, 0, 0, 0, 0, 0, 0\n"
      "prior1 = 0.1, 0.9, 0, 0, 0, 0, 0, 0, 0, 0\n");
  SyntheticSpec spec = make_synthetic_spec(kv);
  CHECK(spec.num_domains == 2);
  CHECK(spec.docs_per_domain == 50);
  CHECK(spec.vocab_size == 120);
  CHECK(spec.domain_marker_strength == 0.8);
  CHECK(spec.seed == 5);
  REQUIRE(spec.per_domain_class_prior.rows() == 2);
  CHECK(spec.per_domain_class_prior(0, 0) == 0.9);
  CHECK(spec.per_domain_class_prior(1, 1) == 0.9);
  CHECK(spec.per_domain_class_prior(1, 5) == 0.0);

  auto missing = kv;
  missing.erase("prior1");
  CHECK_THROWS_WITH(make_synthetic_spec(missing),
                    doctest::Contains("missing prior1"));
  auto short_row = kv;
  short_row["prior0"] = "0.5, 0.5";
  CHECK_THROWS(make_synthetic_spec(short_row));
  auto out_of_range = kv;
  out_of_range["prior1"] = "1.5, 0, 0, 0, 0, 0, 0, 0, 0, 0";
  CHECK_THROWS(make_synthetic_spec(out_of_range));
  auto unknown = kv;
  unknown["documents"] = "10";
  CHECK_THROWS_WITH(make_synthetic_spec(unknown),
                    doctest::Contains("unknown synthetic spec key"));
  auto stray = kv;
  stray["prior7"] = "0, 0, 0, 0, 0, 0, 0, 0, 0, 0";
  CHECK_THROWS(make_synthetic_spec(stray));
}

TEST_CASE("epoch logs serialize to parseable json lines") {
  EpochLog log;
  log.epoch = 7;
  log.loss_mf = 0.5;
  log.loss_rec = 0.25;
  log.loss_trans = 0.125;
  log.loss_domain = 1.5;
  log.loss_total = 0.875;
  log.lambda_d = 0.462117;
  log.lr = 4.5e-5;
  log.val_weighted_f1 = 0.61;
  log.domain_probe_acc = 0.93;

  auto j = nlohmann::json::parse(epoch_log_jsonl(log));
  CHECK(j.at("epoch") == 7);
  CHECK(j.at("loss_mf") == 0.5);
  CHECK(j.at("loss_domain") == 1.5);
  CHECK(j.at("lambda_d") == 0.462117);
  CHECK(j.at("lr") == 4.5e-5);
  CHECK(j.at("val_weighted_f1") == 0.61);
  CHECK(j.at("domain_probe_acc") == 0.93);
  CHECK(epoch_log_jsonl(log).find('\n') == std::string::npos);
}

TEST_CASE("manifests round trip through json") {
  TempFile f("test_io_manifest.json");
  RunManifest m;
  m.config_hash = 0xdeadbeefULL;
  m.dataset_versions = {"synthA:docs=200:fp=abc", "synthB:docs=180:fp=def"};
  m.seeds = {0, 1, 2, 3, 4};
  m.outputs = {"run/model_seed0.ckpt", "run/log_seed0.jsonl"};
  write_manifest(m, f.path);

  RunManifest back = read_manifest(f.path);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.dataset_versions == m.dataset_versions);
  CHECK(back.seeds == m.seeds);
  CHECK(back.outputs == m.outputs);
  REQUIRE(back.created_at.size() == 20);
  CHECK(back.created_at[4] == '-');
  CHECK(back.created_at[10] == 'T');
  CHECK(back.created_at.back() == 'Z');

  TempFile bad("test_io_manifest_bad.json", "{not json");
  CHECK_THROWS(read_manifest(bad.path));
  CHECK_THROWS(read_manifest("/nonexistent/manifest.json"));
}

TEST_CASE("corpus fingerprints react to content changes") {
  Corpus corpus;
  corpus.name = "toy";
  corpus.domain = {0, "toy"};
  Document doc;
  doc.id = "d1";
  doc.raw_text = doc.processed_text = "stay safe";
  doc.domain = corpus.domain;
  MoralLabelVector labels;
  labels.flags[0] = true;
  doc.labels = labels;
  corpus.documents.push_back(doc);

  std::uint64_t base = corpus_fingerprint(corpus);
  CHECK(base == corpus_fingerprint(corpus));

  Corpus renamed = corpus;
  renamed.name = "other";
  CHECK(corpus_fingerprint(renamed) != base);

  Corpus retexted = corpus;
  retexted.documents[0].processed_text = "stay very safe";
  CHECK(corpus_fingerprint(retexted) != base);

  Corpus relabeled = corpus;
  relabeled.documents[0].labels->flags[3] = true;
  CHECK(corpus_fingerprint(relabeled) != base);

  Corpus unlabeled = corpus;
  unlabeled.documents[0].labels.reset();
  CHECK(corpus_fingerprint(unlabeled) != base);
}

TEST_CASE("damf checkpoints restore the model bit for bit") {
  ModelConfig cfg;
  cfg.encoder.hidden_size = 8;
  cfg.encoder.max_len = 12;
  cfg.encoder.num_layers = 1;
  cfg.num_domains = 3;
  Vocabulary vocab = toy_vocab(6);
  DamfModel model(cfg, vocab.size(), 99);
  std::vector<DomainId> domains = {{0, "synthA"}, {1, "synthB"}, {2, "synthC"}};

  TempFile f("test_io_damf.ckpt");
  save_checkpoint(f.path, model, domains, vocab, 0x1234abcdULL);

  CheckpointData data = load_checkpoint(f.path);
  CHECK(data.kind == CheckpointData::Kind::damf);
  CHECK(data.config_hash == 0x1234abcdULL);
  CHECK(data.model_config.encoder.hidden_size == 8);
  CHECK(data.model_config.encoder.max_len == 12);
  CHECK(data.model_config.num_domains == 3);
  CHECK(data.model_config.trans_enabled);
  REQUIRE(data.domains.size() == 3);
  CHECK(data.domains[1].index == 1);
  CHECK(data.domains[1].name == "synthB");
  CHECK(data.vocab.id_to_token == vocab.id_to_token);
  CHECK(data.vocab.id("word2") == vocab.id("word2"));
  REQUIRE(data.damf.has_value());
  CHECK(!data.baseline.has_value());

  auto original = model.params();
  auto restored = data.damf->params();
  REQUIRE(original.size() == restored.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(original[i]->name == restored[i]->name);
    CHECK(original[i]->value.cwiseEqual(restored[i]->value).all());
    CHECK(restored[i]->grad.isZero(0.0));
  }

  TokenSequence seq = toy_seq(cfg.encoder.max_len);
  Vector a = model.mf_forward(model.transform(model.encode(seq)), domains[1]);
  Vector b = data.damf->mf_forward(data.damf->transform(data.damf->encode(seq)),
                                   domains[1]);
  CHECK(a.cwiseEqual(b).all());
}

TEST_CASE("baseline checkpoints restore predictions exactly") {
  EncoderConfig enc;
  enc.hidden_size = 8;
  enc.max_len = 12;
  enc.num_layers = 1;
  Vocabulary vocab = toy_vocab(6);
  BaselineModel model(enc, vocab.size(), 0.3, 41);

  TempFile f("test_io_baseline.ckpt");
  save_checkpoint(f.path, model, vocab, 0x77ULL);

  CheckpointData data = load_checkpoint(f.path);
  CHECK(data.kind == CheckpointData::Kind::baseline);
  CHECK(data.config_hash == 0x77ULL);
  CHECK(data.domains.empty());
  REQUIRE(data.baseline.has_value());
  CHECK(!data.damf.has_value());
  CHECK(data.baseline->dropout_rate() == 0.3);

  TokenSequence seq = toy_seq(enc.max_len);
  Vector a = model.predict(seq);
  Vector b = data.baseline->predict(seq);
  CHECK(a.cwiseEqual(b).all());
}

TEST_CASE("corrupt checkpoints are refused") {
  CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt"));

  TempFile wrong("test_io_wrong.ckpt", "BADMAGIC and then some bytes");
  CHECK_THROWS_WITH(load_checkpoint(wrong.path),
                    doctest::Contains("not a checkpoint"));

  // valid header, then cut off mid-stream
  ModelConfig cfg;
  cfg.encoder.hidden_size = 8;
  cfg.encoder.max_len = 12;
  cfg.encoder.num_layers = 1;
  Vocabulary vocab = toy_vocab(4);
  DamfModel model(cfg, vocab.size(), 1);
  TempFile full("test_io_full.ckpt");
  save_checkpoint(full.path, model, {{0, "a"}, {1, "b"}}, vocab, 5);

  std::ifstream in(full.path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  REQUIRE(bytes.size() > 200);
  TempFile cut("test_io_cut.ckpt");
  {
    std::ofstream out(cut.path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(cut.path));
}
