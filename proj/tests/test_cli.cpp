// End-to-end runs of the damf binary: convert -> train -> evaluate -> tsne,
// adapter formats, overwrite refusal, and byte-level rerun determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

#include "damf/corpus.hpp"
#include "damf/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace damf;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(CLI_BINARY) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::path(SCRATCH_DIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string synth_spec() {
  return "num_domains = 2\n"
         "docs_per_domain = 60\n"
         "vocab_size = 80\n"
         "domain_marker_strength = 0.5\n"
         "seed = 7\n"
         "prior0 = 0.5, 0.3, 0.15, 0.1, 0.1, 0.05, 0.1, 0.05, 0.05, 0.05\n"
         "prior1 = 0.4, 0.4, 0.15, 0.1, 0.1, 0.05, 0.1, 0.05, 0.05, 0.05\n";
}

std::string tiny_train_conf(const fs::path& data) {
  std::ostringstream conf;
  conf << "sources = " << (data / "synth0.jsonl").string() << "\n"
       << "target = " << (data / "synth1.jsonl").string() << "\n"
       << "hidden_size = 12\nmax_len = 16\nnum_layers = 1\n"
       << "total_epochs = 3\nwarmup_epochs = 1\nbatch_size = 32\n"
       << "lr_init = 0.002\ngamma = 10\nlambda_rec = 0.5\n"
       << "lambda_trans = 0.1\nprobe_sample_cap = 40\n";
  return conf.str();
}

}  // namespace

TEST_CASE("synthetic pipeline: convert, train, evaluate, tsne, label-dist") {
  fs::path dir = scratch("pipeline");
  write_file(dir / "synth.conf", synth_spec());

  REQUIRE(run_cli("convert --adapter synthetic --in " +
                  (dir / "synth.conf").string() + " --out " +
                  (dir / "data").string()) == 0);
  CHECK(fs::exists(dir / "data" / "synth0.jsonl"));
  CHECK(fs::exists(dir / "data" / "synth1.jsonl"));
  CHECK(fs::exists(dir / "data" / "manifest.json"));

  write_file(dir / "exp.conf", tiny_train_conf(dir / "data"));
  REQUIRE(run_cli("train --config " + (dir / "exp.conf").string() +
                  " --seed 5 --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "model.ckpt"));
  CHECK(fs::exists(dir / "run" / "manifest.json"));

  // three epochs logged, schedule fields present
  {
    std::ifstream log(dir / "run" / "log.jsonl");
    std::string line;
    int epochs = 0;
    while (std::getline(log, line)) {
      json entry = json::parse(line);
      CHECK(entry.at("epoch") == epochs);
      CHECK(entry.contains("lambda_d"));
      CHECK(entry.contains("val_weighted_f1"));
      ++epochs;
    }
    CHECK(epochs == 3);
  }

  REQUIRE(run_cli("evaluate --checkpoint " + (dir / "run" / "model.ckpt").string() +
                  " --test " + (dir / "data" / "synth1.jsonl").string() +
                  " --out " + (dir / "eval").string()) == 0);
  json report = json::parse(read_file(dir / "eval" / "report.json"));
  CHECK(report.at("model") == "damf");
  CHECK(report.at("weighted_f1").get<double>() >= 0.0);
  CHECK(report.at("weighted_f1").get<double>() <= 1.0);
  CHECK(report.at("classes").size() == 10);
  {
    std::ifstream preds(dir / "eval" / "predictions.jsonl");
    std::string line;
    int rows = 0;
    while (std::getline(preds, line)) ++rows;
    CHECK(rows == 60);
  }

  REQUIRE(run_cli("tsne --corpora " + (dir / "data" / "synth0.jsonl").string() +
                  "," + (dir / "data" / "synth1.jsonl").string() +
                  " --sample 20 --iters 60 --perplexity 6 --checkpoint " +
                  (dir / "run" / "model.ckpt").string() + " --out " +
                  (dir / "tsne.csv").string()) == 0);
  {
    std::ifstream csv(dir / "tsne.csv");
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line == "x,y,domain");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 40);
  }

  REQUIRE(run_cli("label-dist --corpus " +
                  (dir / "data" / "synth1.jsonl").string() + " --out " +
                  (dir / "dist.json").string()) == 0);
  json dist = json::parse(read_file(dir / "dist.json"));
  CHECK(dist.at("labeled_docs") == 60);
  for (int c = 0; c < kNumClasses; ++c) {
    double f = dist.at("fractions").at(kClassNames[c]).get<double>();
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("rerunning train with --force reproduces the log byte for byte") {
  fs::path dir = scratch("determinism");
  write_file(dir / "synth.conf", synth_spec());
  REQUIRE(run_cli("convert --adapter synthetic --in " +
                  (dir / "synth.conf").string() + " --out " +
                  (dir / "data").string()) == 0);
  write_file(dir / "exp.conf", tiny_train_conf(dir / "data"));

  const std::string train = "train --config " + (dir / "exp.conf").string() +
                            " --seed 9 --out " + (dir / "run").string();
  REQUIRE(run_cli(train) == 0);
  std::string first_log = read_file(dir / "run" / "log.jsonl");
  std::string first_ckpt = read_file(dir / "run" / "model.ckpt");

  REQUIRE(run_cli(train + " --force") == 0);
  CHECK(read_file(dir / "run" / "log.jsonl") == first_log);
  CHECK(read_file(dir / "run" / "model.ckpt") == first_ckpt);
}

TEST_CASE("existing outputs are refused without --force") {
  fs::path dir = scratch("force");
  write_file(dir / "synth.conf", synth_spec());
  const std::string convert = "convert --adapter synthetic --in " +
                              (dir / "synth.conf").string() + " --out " +
                              (dir / "data").string();
  REQUIRE(run_cli(convert) == 0);

  write_file(dir / "data" / "synth0.jsonl", "sentinel\n");
  CHECK(run_cli(convert) != 0);
  CHECK(read_file(dir / "data" / "synth0.jsonl") == "sentinel\n");
  REQUIRE(run_cli(convert + " --force") == 0);
  CHECK(read_file(dir / "data" / "synth0.jsonl") != "sentinel\n");
}

TEST_CASE("mftc adapter: majority vote over annotation strings") {
  fs::path dir = scratch("mftc");
  json tweets = json::array();
  tweets.push_back({{"tweet_id", 101},
                    {"tweet_text", "We must protect the vulnerable"},
                    {"annotations",
                     json::array({{{"annotator", "a1"}, {"annotation", "care"}},
                                  {{"annotator", "a2"}, {"annotation", "care,harm"}},
                                  {{"annotator", "a3"}, {"annotation", "care"}}})}});
  tweets.push_back({{"tweet_id", "102"},
                    {"tweet_text", "Just a plain statement"},
                    {"annotations",
                     json::array({{{"annotator", "a1"}, {"annotation", "non-moral"}},
                                  {{"annotator", "a2"}, {"annotation", "non-moral"}}})}});
  // contested: one vote each, both classes tied at exactly half
  tweets.push_back({{"tweet_id", "103"},
                    {"tweet_text", "Contested annotation"},
                    {"annotations",
                     json::array({{{"annotator", "a1"}, {"annotation", "loyalty"}},
                                  {{"annotator", "a2"}, {"annotation", "betrayal"}}})}});
  json root;
  root["Tweets"] = tweets;
  write_file(dir / "raw.json", root.dump());

  REQUIRE(run_cli("convert --adapter mftc --in " + (dir / "raw.json").string() +
                  " --out " + (dir / "mftc.jsonl").string()) == 0);

  Corpus corpus = load_corpus((dir / "mftc.jsonl").string(), DomainId{0, "mftc"});
  REQUIRE(corpus.documents.size() == 2);  // the contested tweet is dropped
  CHECK(corpus.documents[0].id == "101");
  REQUIRE(corpus.documents[0].labels.has_value());
  CHECK(corpus.documents[0].labels->flags[0]);        // care: 3/3
  CHECK_FALSE(corpus.documents[0].labels->flags[1]);  // harm: 1/3
  CHECK(corpus.documents[1].id == "102");
  REQUIRE(corpus.documents[1].labels.has_value());
  CHECK_FALSE(corpus.documents[1].labels->any());
}

TEST_CASE("tsv adapter: id/text/labels columns with a header row") {
  fs::path dir = scratch("tsv");
  write_file(dir / "raw.tsv",
             "id\ttext\tlabels\n"
             "c1\tBills on the floor today\tauthority|subversion\n"
             "c2\tNothing moral here\t\n"
             "c3\tFairness for all workers\tfairness\n");
  REQUIRE(run_cli("convert --adapter congress --in " + (dir / "raw.tsv").string() +
                  " --out " + (dir / "congress.jsonl").string()) == 0);

  Corpus corpus =
      load_corpus((dir / "congress.jsonl").string(), DomainId{0, "congress"});
  REQUIRE(corpus.documents.size() == 3);
  CHECK(corpus.documents[0].labels->flags[6]);  // authority
  CHECK(corpus.documents[0].labels->flags[7]);  // subversion
  CHECK_FALSE(corpus.documents[1].labels->any());
  CHECK(corpus.documents[2].labels->flags[2]);  // fairness

  // malformed line: missing the second tab
  write_file(dir / "bad.tsv", "x1\tonly one field\n");
  CHECK(run_cli("convert --adapter congress --in " + (dir / "bad.tsv").string() +
                " --out " + (dir / "bad.jsonl").string()) != 0);
}

TEST_CASE("emfd adapter: scores threshold at 0.5") {
  fs::path dir = scratch("emfd");
  json r1 = {{"id", "e1"},
             {"text", "Loyalty to the group"},
             {"scores", {{"loyalty", 0.82}, {"care", 0.5}, {"harm", 0.49}}}};
  json r2 = {{"id", "e2"},
             {"text", "Nothing above threshold"},
             {"scores", {{"purity", 0.2}}}};
  write_file(dir / "raw.jsonl", r1.dump() + "\n" + r2.dump() + "\n");
  REQUIRE(run_cli("convert --adapter emfd --in " + (dir / "raw.jsonl").string() +
                  " --out " + (dir / "emfd.jsonl").string()) == 0);

  Corpus corpus = load_corpus((dir / "emfd.jsonl").string(), DomainId{0, "emfd"});
  REQUIRE(corpus.documents.size() == 2);
  CHECK(corpus.documents[0].labels->flags[4]);        // loyalty 0.82
  CHECK(corpus.documents[0].labels->flags[0]);        // care exactly 0.5
  CHECK_FALSE(corpus.documents[0].labels->flags[1]);  // harm 0.49
  CHECK_FALSE(corpus.documents[1].labels->any());

  // unknown class name in the score map
  json bad = {{"id", "e3"}, {"text", "x"}, {"scores", {{"liberty", 0.9}}}};
  write_file(dir / "bad.jsonl", bad.dump() + "\n");
  CHECK(run_cli("convert --adapter emfd --in " + (dir / "bad.jsonl").string() +
                " --out " + (dir / "bad_out.jsonl").string()) != 0);
}

TEST_CASE("missing corpus and bad flags exit non-zero") {
  fs::path dir = scratch("errors");
  CHECK(run_cli("label-dist --corpus no_such_corpus --out " +
                (dir / "d.json").string()) != 0);
  CHECK(run_cli("train --out " + (dir / "r").string()) != 0);  // no config
  CHECK(run_cli("convert --adapter nope --in x --out y") != 0);
  CHECK(run_cli("definitely-not-a-subcommand") != 0);
}
