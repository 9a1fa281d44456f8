#include "damf/types.hpp"

namespace damf {

int class_index(const std::string& name) {
  for (int c = 0; c < kNumClasses; ++c)
    if (name == kClassNames[c]) return c;
  return -1;
}

LabelCounts count_labels(const std::vector<Document>& docs) {
  LabelCounts counts;
  for (const auto& doc : docs) {
    if (!doc.labels) continue;
    for (int c = 0; c < kNumClasses; ++c) {
      if (doc.labels->flags[c])
        ++counts.positives[c];
      else
        ++counts.negatives[c];
    }
  }
  return counts;
}

}  // namespace damf
