#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace odqa {

enum class ScoreSource { dense, bm25, diversity, reader };

inline const char* to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::dense: return "dense";
    case ScoreSource::bm25: return "bm25";
    case ScoreSource::diversity: return "diversity";
    case ScoreSource::reader: return "reader";
  }
  return "?";
}

struct RankedEntry {
  std::string chunk_id;
  double score = 0.0;
  ScoreSource source = ScoreSource::dense;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Best first.
using RankedList = std::vector<RankedEntry>;

inline std::vector<std::string> chunk_ids(const RankedList& list) {
  std::vector<std::string> ids;
  ids.reserve(list.size());
  for (const auto& e : list) ids.push_back(e.chunk_id);
  return ids;
}

}  // namespace odqa
