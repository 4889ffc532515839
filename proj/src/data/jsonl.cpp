#include "r2d/data/jsonl.hpp"

#include <fstream>

#include "json.hpp"
#include "r2d/errors.hpp"

namespace r2d::data {

namespace {

std::string required_text(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing key \"" + key + "\"");
  if (!it->is_string()) throw FormatError(where + ": key \"" + key + "\" is not a string");
  auto value = it->get<std::string>();
  if (value.empty()) throw FormatError(where + ": key \"" + key + "\" is empty");
  return value;
}

}  // namespace

std::vector<Example> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw FormatError(where + ": expected a JSON object");
    Example ex;
    if (auto it = obj.find("id"); it != obj.end()) {
      ex.id = it->is_string() ? it->get<std::string>() : it->dump();
    } else {
      ex.id = "line-" + std::to_string(line_no);
    }
    ex.input_text = required_text(obj, "input", where);
    ex.gold_label = required_text(obj, "label", where);
    ex.gold_rationale = required_text(obj, "rationale", where);
    out.push_back(std::move(ex));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const Example> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& ex : examples) {
    nlohmann::ordered_json obj;
    obj["id"] = ex.id;
    obj["input"] = ex.input_text;
    obj["label"] = ex.gold_label;
    obj["rationale"] = ex.gold_rationale;
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace r2d::data
