#include "damf/corpus.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "damf/rng.hpp"
#include "json.hpp"

namespace damf {

using nlohmann::json;

std::optional<MoralLabelVector> majority_vote(const AnnotationSet& ann,
                                              int num_annotators) {
  if (num_annotators <= 0 || ann.per_annotator.empty())
    throw std::invalid_argument("majority_vote: no annotators for doc '" +
                                ann.doc_id + "'");
  if (static_cast<int>(ann.per_annotator.size()) != num_annotators)
    throw std::invalid_argument("majority_vote: annotator count mismatch for doc '" +
                                ann.doc_id + "'");

  MoralLabelVector out;
  bool any_majority = false;
  bool any_half_tie = false;
  for (int c = 0; c < kNumClasses; ++c) {
    int votes = 0;
    for (const auto& a : ann.per_annotator)
      if (a.flags[c]) ++votes;
    if (2 * votes > num_annotators) {
      out.flags[c] = true;
      any_majority = true;
    } else if (2 * votes == num_annotators) {
      any_half_tie = true;
    }
  }
  if (!any_majority && any_half_tie) return std::nullopt;
  return out;
}

namespace {

MoralLabelVector parse_label_array(const json& arr, std::int64_t line_no,
                                   const char* field) {
  if (!arr.is_array())
    throw std::runtime_error("line " + std::to_string(line_no) + ": '" +
                             field + "' must be an array of class names");
  MoralLabelVector lv;
  for (const auto& item : arr) {
    if (!item.is_string())
      throw std::runtime_error("line " + std::to_string(line_no) + ": '" +
                               field + "' entries must be strings");
    int c = class_index(item.get<std::string>());
    if (c < 0)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": unknown class name '" +
                               item.get<std::string>() + "'");
    lv.flags[c] = true;
  }
  return lv;
}

}  // namespace

Corpus load_corpus(const std::string& path, const DomainId& domain,
                   CorpusFormat format, LoadReport* report,
                   const EmojiTable& emoji) {
  if (format != CorpusFormat::jsonl)
    throw std::invalid_argument("load_corpus: unsupported format");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);

  Corpus corpus;
  corpus.name = path;
  corpus.domain = domain;
  LoadReport local;
  std::unordered_set<std::string> seen_ids;

  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++local.total_records;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (!rec.is_object())
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": record must be a JSON object");
    if (!rec.contains("id") || !rec["id"].is_string())
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": missing string field 'id'");
    if (!rec.contains("text") || !rec["text"].is_string())
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": missing string field 'text'");

    Document doc;
    doc.id = rec["id"].get<std::string>();
    if (!seen_ids.insert(doc.id).second)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": duplicate document id '" + doc.id + "'");
    doc.raw_text = rec["text"].get<std::string>();
    doc.processed_text = preprocess_text(doc.raw_text, emoji);
    doc.domain = domain;

    if (rec.contains("labels")) {
      doc.labels = parse_label_array(rec["labels"], line_no, "labels");
      doc.split = Split::train;
    } else if (rec.contains("annotations")) {
      const auto& anns = rec["annotations"];
      if (!anns.is_array() || anns.empty())
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": 'annotations' must be a non-empty array");
      AnnotationSet set;
      set.doc_id = doc.id;
      for (const auto& a : anns)
        set.per_annotator.push_back(parse_label_array(a, line_no, "annotations"));
      auto voted =
          majority_vote(set, static_cast<int>(set.per_annotator.size()));
      if (!voted) {
        ++local.discarded_no_majority;
        continue;
      }
      doc.labels = *voted;
      doc.split = Split::train;
    } else {
      doc.split = Split::unlabeled_target;
    }
    corpus.documents.push_back(std::move(doc));
    ++local.kept;
  }

  corpus.label_counts = count_labels(corpus.documents);
  if (report) *report = local;
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_corpus: cannot open " + path);
  for (const auto& doc : corpus.documents) {
    json rec;
    rec["id"] = doc.id;
    rec["text"] = doc.raw_text;
    if (doc.labels) {
      json labels = json::array();
      for (int c = 0; c < kNumClasses; ++c)
        if (doc.labels->flags[c]) labels.push_back(kClassNames[c]);
      rec["labels"] = labels;
    }
    out << rec.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_corpus: write failed for " + path);
}

std::pair<Corpus, Corpus> split_train_val(const Corpus& corpus, double ratio,
                                          std::uint64_t seed) {
  const auto n = static_cast<std::int64_t>(corpus.documents.size());
  if (n < 2)
    throw std::invalid_argument("split_train_val: need at least 2 documents");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split_train_val: ratio must be in (0,1)");

  std::vector<std::size_t> order(corpus.documents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  auto n_train = static_cast<std::int64_t>(ratio * static_cast<double>(n));
  if (n_train < 1) n_train = 1;
  if (n_train >= n) n_train = n - 1;

  Corpus train, val;
  train.name = corpus.name + "/train";
  val.name = corpus.name + "/val";
  train.domain = corpus.domain;
  val.domain = corpus.domain;
  for (std::int64_t i = 0; i < n; ++i) {
    Document doc = corpus.documents[order[static_cast<std::size_t>(i)]];
    if (i < n_train) {
      doc.split = Split::train;
      train.documents.push_back(std::move(doc));
    } else {
      doc.split = Split::val;
      val.documents.push_back(std::move(doc));
    }
  }
  train.label_counts = count_labels(train.documents);
  val.label_counts = count_labels(val.documents);
  return {std::move(train), std::move(val)};
}

Vector compute_label_distribution(const Corpus& corpus) {
  const auto n = corpus.num_labeled();
  if (n == 0)
    throw std::invalid_argument(
        "compute_label_distribution: corpus has no labeled documents");
  Vector frac(kNumClasses);
  const auto counts = count_labels(corpus.documents);
  for (int c = 0; c < kNumClasses; ++c)
    frac[c] = static_cast<Scalar>(counts.positives[c]) / static_cast<Scalar>(n);
  return frac;
}

Corpus strip_labels(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& doc : out.documents) {
    doc.labels.reset();
    doc.split = Split::unlabeled_target;
  }
  out.label_counts = LabelCounts{};
  return out;
}

}  // namespace damf
