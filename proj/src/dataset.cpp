#include "dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include <json.hpp>

#include "minilang.hpp"

namespace xastnn {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "validation" || name == "dev") return Split::kValid;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kDataFormat, "unknown split '" + name + "'");
}

namespace {

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return in;
}

// Non-blank lines parsed as JSON objects, with their 1-based line numbers.
std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(std::istream& in, const char* what) {
  std::vector<std::pair<std::size_t, nlohmann::json>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kDataFormat, std::string(what) + " line " + std::to_string(no) + ": " + e.what());
    }
    if (!doc.is_object()) {
      fail(ErrorCode::kDataFormat, std::string(what) + " line " + std::to_string(no) + ": not an object");
    }
    out.emplace_back(no, std::move(doc));
  }
  return out;
}

std::string string_field(const nlohmann::json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    fail(ErrorCode::kDataFormat, where + ": field \"" + key + "\" must be a string");
  }
  return it->get<std::string>();
}

std::int32_t int_field(const nlohmann::json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_number_integer()) {
    fail(ErrorCode::kDataFormat, where + ": field \"" + key + "\" must be an integer");
  }
  return it->get<std::int32_t>();
}

std::optional<Split> split_field(const nlohmann::json& rec, const std::string& where) {
  auto it = rec.find("split");
  if (it == rec.end()) return std::nullopt;
  if (!it->is_string()) fail(ErrorCode::kDataFormat, where + ": \"split\" must be a string");
  return parse_split(it->get<std::string>());
}

// Seeded 80/10/10 assignment for the records in `unassigned`.
template <typename Rec>
void assign_splits(std::vector<Rec>& recs, const std::vector<std::size_t>& unassigned, std::uint64_t seed) {
  std::vector<std::size_t> order = unassigned;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = order.size();
  const std::size_t n_train = (n * 8) / 10;
  const std::size_t n_valid = (n * 9) / 10 - n_train;
  for (std::size_t i = 0; i < n; ++i) {
    recs[order[i]].split = i < n_train ? Split::kTrain
                           : i < n_train + n_valid ? Split::kValid
                                                   : Split::kTest;
  }
}

}  // namespace

Program program_from_json(const nlohmann::json& record, const std::string& where) {
  Program p;
  p.id = string_field(record, "id", where);
  const bool has_source = record.contains("source");
  const bool has_ast = record.contains("ast");
  if (has_source == has_ast) {
    fail(ErrorCode::kDataFormat, where + ": exactly one of \"source\" or \"ast\" is required");
  }
  try {
    if (has_source) {
      p.ast = std::make_shared<const Ast>(parse_minilang(string_field(record, "source", where)));
    } else {
      p.ast = std::make_shared<const Ast>(import_ast_json(record.at("ast")));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDataFormat) throw;
    fail(ErrorCode::kDataFormat, where + " (id " + p.id + "): " + e.what());
  }
  return p;
}

std::vector<const LabeledProgram*> ClassificationDataset::subset(Split s) const {
  std::vector<const LabeledProgram*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

std::vector<const ClonePair*> CloneDataset::subset(Split s) const {
  std::vector<const ClonePair*> out;
  for (const auto& r : pairs) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

ClassificationDataset read_classification(std::istream& in, std::uint64_t split_seed) {
  ClassificationDataset ds;
  std::vector<std::size_t> unassigned;
  std::unordered_map<std::string, std::size_t> seen;
  std::int32_t max_label = -1;
  for (auto& [no, rec] : read_jsonl(in, "dataset")) {
    const std::string where = "dataset line " + std::to_string(no);
    LabeledProgram lp;
    lp.program = program_from_json(rec, where);
    lp.label = int_field(rec, "label", where);
    if (lp.label < 0) fail(ErrorCode::kDataFormat, where + ": negative label");
    if (!seen.emplace(lp.program.id, no).second) {
      fail(ErrorCode::kDataFormat, where + ": duplicate id '" + lp.program.id + "'");
    }
    if (auto s = split_field(rec, where)) {
      lp.split = *s;
    } else {
      unassigned.push_back(ds.records.size());
    }
    max_label = std::max(max_label, lp.label);
    ds.records.push_back(std::move(lp));
  }
  if (ds.records.empty()) fail(ErrorCode::kEmptyCorpus, "dataset has no records");
  assign_splits(ds.records, unassigned, split_seed);
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

ClassificationDataset read_classification_file(const std::string& path, std::uint64_t split_seed) {
  auto in = open_file(path);
  return read_classification(in, split_seed);
}

std::unordered_map<std::string, Program> read_program_table(std::istream& in) {
  std::unordered_map<std::string, Program> out;
  for (auto& [no, rec] : read_jsonl(in, "program table")) {
    const std::string where = "program table line " + std::to_string(no);
    Program p = program_from_json(rec, where);
    const std::string id = p.id;
    if (!out.emplace(id, std::move(p)).second) {
      fail(ErrorCode::kDataFormat, where + ": duplicate id '" + id + "'");
    }
  }
  return out;
}

CloneDataset read_clone(std::istream& pairs, std::istream& programs, std::uint64_t split_seed) {
  CloneDataset ds;
  ds.programs = read_program_table(programs);
  std::vector<std::size_t> unassigned;
  for (auto& [no, rec] : read_jsonl(pairs, "pairs")) {
    const std::string where = "pairs line " + std::to_string(no);
    ClonePair p;
    p.id1 = string_field(rec, "id1", where);
    p.id2 = string_field(rec, "id2", where);
    p.label = int_field(rec, "label", where);
    if (p.label != 0 && p.label != 1) fail(ErrorCode::kDataFormat, where + ": label must be 0 or 1");
    for (const std::string* id : {&p.id1, &p.id2}) {
      if (!ds.programs.count(*id)) {
        fail(ErrorCode::kDataFormat, where + ": unknown program id '" + *id + "'");
      }
    }
    if (auto s = split_field(rec, where)) {
      p.split = *s;
    } else {
      unassigned.push_back(ds.pairs.size());
    }
    ds.pairs.push_back(std::move(p));
  }
  if (ds.pairs.empty()) fail(ErrorCode::kEmptyCorpus, "no clone pairs");
  assign_splits(ds.pairs, unassigned, split_seed);
  return ds;
}

CloneDataset read_clone_files(const std::string& pairs_path, const std::string& programs_path,
                              std::uint64_t split_seed) {
  auto pairs = open_file(pairs_path);
  auto programs = open_file(programs_path);
  return read_clone(pairs, programs, split_seed);
}

void write_classification(std::ostream& out, const std::vector<std::string>& sources,
                          const std::vector<std::int32_t>& labels) {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    nlohmann::json rec{{"id", "p" + std::to_string(i)}, {"label", labels.at(i)}, {"source", sources[i]}};
    out << rec.dump() << '\n';
  }
}

}  // namespace xastnn
