#include "damf/synthetic.hpp"

#include <stdexcept>
#include <string>

#include "damf/rng.hpp"

namespace damf {

namespace {

// Documents emit tokens for a class they are not labeled with at this rate,
// so minority-class tokens carry a posterior below 0.5 and unweighted
// training has something real to get wrong.
constexpr double kLabelNoise = 0.10;

}  // namespace

std::vector<Corpus> generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.num_domains < 1)
    throw std::invalid_argument("generate_synthetic_corpus: num_domains < 1");
  if (spec.docs_per_domain < 1)
    throw std::invalid_argument("generate_synthetic_corpus: docs_per_domain < 1");
  if (spec.per_domain_class_prior.rows() != spec.num_domains ||
      spec.per_domain_class_prior.cols() != kNumClasses)
    throw std::invalid_argument(
        "generate_synthetic_corpus: per_domain_class_prior must be "
        "num_domains x 10");
  for (int d = 0; d < spec.num_domains; ++d)
    for (int c = 0; c < kNumClasses; ++c) {
      const Scalar p = spec.per_domain_class_prior(d, c);
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(
            "generate_synthetic_corpus: priors must lie in [0,1]");
    }
  if (!(spec.domain_marker_strength >= 0.0 &&
        spec.domain_marker_strength <= 1.0))
    throw std::invalid_argument(
        "generate_synthetic_corpus: domain_marker_strength must lie in [0,1]");

  const int class_pool = std::max(2, spec.vocab_size / 20);
  const int marker_pool = std::max(2, spec.vocab_size / 30);
  const int common_pool =
      std::max(2, spec.vocab_size - kNumClasses * class_pool -
                      spec.num_domains * marker_pool);

  Rng rng(spec.seed);
  std::vector<Corpus> corpora;
  corpora.reserve(static_cast<std::size_t>(spec.num_domains));

  for (int d = 0; d < spec.num_domains; ++d) {
    Corpus corpus;
    corpus.domain = DomainId{d, "synth" + std::to_string(d)};
    corpus.name = corpus.domain.name;
    corpus.documents.reserve(static_cast<std::size_t>(spec.docs_per_domain));

    for (int i = 0; i < spec.docs_per_domain; ++i) {
      MoralLabelVector labels;
      for (int c = 0; c < kNumClasses; ++c)
        labels.flags[c] = rng.bernoulli(spec.per_domain_class_prior(d, c));

      std::vector<std::string> tokens;
      for (int k = 0; k < 3; ++k)
        tokens.push_back("w" + std::to_string(rng.below(common_pool)));
      for (int c = 0; c < kNumClasses; ++c) {
        if (labels.flags[c]) {
          const int n = 2 + (rng.bernoulli(0.5) ? 1 : 0);
          for (int k = 0; k < n; ++k)
            tokens.push_back("c" + std::to_string(c) + "t" +
                             std::to_string(rng.below(class_pool)));
        }
        if (rng.bernoulli(kLabelNoise)) {
          const int n = 1 + (rng.bernoulli(0.5) ? 1 : 0);
          for (int k = 0; k < n; ++k)
            tokens.push_back("c" + std::to_string(c) + "t" +
                             std::to_string(rng.below(class_pool)));
        }
      }
      if (rng.bernoulli(spec.domain_marker_strength)) {
        for (int k = 0; k < 2; ++k)
          tokens.push_back("d" + std::to_string(d) + "m" +
                           std::to_string(rng.below(marker_pool)));
      }
      rng.shuffle(tokens);

      Document doc;
      doc.id = corpus.domain.name + "-" + std::to_string(i);
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t) doc.raw_text += ' ';
        doc.raw_text += tokens[t];
      }
      doc.processed_text = doc.raw_text;  // already clean ASCII tokens
      doc.domain = corpus.domain;
      doc.labels = labels;
      doc.split = Split::train;
      corpus.documents.push_back(std::move(doc));
    }
    corpus.label_counts = count_labels(corpus.documents);
    corpora.push_back(std::move(corpus));
  }
  return corpora;
}

}  // namespace damf
