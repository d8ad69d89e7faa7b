#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mixnet/geometry/polygon.hpp"

namespace mixnet::eval {

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Detection {
  geom::Polygon polygon;
  double score = 1.0;
};

/// One JSONL line: {"image_id": ..., "detections": [{"polygon": [[x,y],...], "score": s}]}.
/// Ground truth uses the same schema without scores.
struct ImageRecord {
  std::string image_id;
  std::vector<Detection> detections;
};

std::string to_jsonl_line(const ImageRecord& record, bool with_scores);
ImageRecord parse_jsonl_line(const std::string& line);

/// Reads every non-empty line. Throws RecordError with the line number on bad input.
std::vector<ImageRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<ImageRecord>& records, bool with_scores);

}  // namespace mixnet::eval
