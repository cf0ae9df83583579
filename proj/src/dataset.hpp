#pragma once

// Line-delimited JSON datasets.
//
//   classification: {"id": str, "label": int, "source": str | "ast": {...}, "split"?: str}
//   program table:  {"id": str, "source": str | "ast": {...}}
//   clone pairs:    {"id1": str, "id2": str, "label": 0|1, "split"?: str}
//
// "split" is one of train, valid, test. Records without it are assigned by a
// seeded 80/10/10 shuffle.

#include <cstdint>
#include <istream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ast.hpp"
#include "errors.hpp"

namespace xastnn {

enum class Split { kTrain, kValid, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct Program {
  std::string id;
  std::shared_ptr<const Ast> ast;
};

struct LabeledProgram {
  Program program;
  std::int32_t label = 0;
  Split split = Split::kTrain;
};

struct ClassificationDataset {
  std::vector<LabeledProgram> records;
  std::size_t classes = 0;  // max label + 1

  std::vector<const LabeledProgram*> subset(Split s) const;
};

struct ClonePair {
  std::string id1, id2;
  std::int32_t label = 0;
  Split split = Split::kTrain;
};

struct CloneDataset {
  std::unordered_map<std::string, Program> programs;
  std::vector<ClonePair> pairs;

  std::vector<const ClonePair*> subset(Split s) const;
};

// `source` or `ast` of a record; parse errors become DataFormat errors that
// name the record.
Program program_from_json(const nlohmann::json& record, const std::string& where);

ClassificationDataset read_classification(std::istream& in, std::uint64_t split_seed = 42);
ClassificationDataset read_classification_file(const std::string& path, std::uint64_t split_seed = 42);

std::unordered_map<std::string, Program> read_program_table(std::istream& in);
CloneDataset read_clone(std::istream& pairs, std::istream& programs, std::uint64_t split_seed = 42);
CloneDataset read_clone_files(const std::string& pairs_path, const std::string& programs_path,
                              std::uint64_t split_seed = 42);

// Writers used by the corpus generators.
void write_classification(std::ostream& out, const std::vector<std::string>& sources,
                          const std::vector<std::int32_t>& labels);

}  // namespace xastnn
