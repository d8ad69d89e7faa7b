#include "mixnet/eval/records.hpp"

#include <fstream>
#include "json.hpp"

namespace mixnet::eval {

using nlohmann::json;

std::string to_jsonl_line(const ImageRecord& record, bool with_scores) {
  json dets = json::array();
  for (const auto& d : record.detections) {
    json poly = json::array();
    for (const auto& p : d.polygon) poly.push_back({p.x, p.y});
    json item{{"polygon", std::move(poly)}};
    if (with_scores) item["score"] = d.score;
    dets.push_back(std::move(item));
  }
  return json{{"image_id", record.image_id}, {"detections", std::move(dets)}}.dump();
}

ImageRecord parse_jsonl_line(const std::string& line) {
  ImageRecord r;
  try {
    const json j = json::parse(line);
    r.image_id = j.at("image_id").get<std::string>();
    for (const auto& d : j.at("detections")) {
      Detection det;
      for (const auto& p : d.at("polygon")) det.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      det.score = d.value("score", 1.0);
      r.detections.push_back(std::move(det));
    }
  } catch (const json::exception& e) {
    throw RecordError(std::string("malformed detection record: ") + e.what());
  }
  return r;
}

std::vector<ImageRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RecordError("cannot open " + path);
  std::vector<ImageRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_jsonl_line(line));
    } catch (const RecordError& e) {
      throw RecordError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<ImageRecord>& records, bool with_scores) {
  std::ofstream out(path);
  if (!out) throw RecordError("cannot write " + path);
  for (const auto& r : records) out << to_jsonl_line(r, with_scores) << "\n";
}

}  // namespace mixnet::eval
