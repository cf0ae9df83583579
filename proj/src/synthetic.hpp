#pragma once

// Synthetic mini-language corpora for tests, experiments and benchmarks.

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace xastnn {

// Four classes, label = 2 * order + shape:
//   order: the top-level while loop comes before (0) or after (1) the if
//   shape: the loop condition is (a + b) * c < d (0) or (a * b) + c < d (1)
// Identifiers, constants and filler statements are random.
struct ClassificationCorpus {
  std::vector<std::string> sources;
  std::vector<std::int32_t> labels;
};

ClassificationCorpus classification_corpus(std::size_t n, std::uint64_t seed);

// Pairs of programs instantiated from a fixed set of templates with renamed
// identifiers. label 1 = same template.
struct CloneCorpus {
  std::vector<std::string> ids;
  std::vector<std::string> sources;
  struct Pair {
    std::size_t left, right;  // indices into sources
    std::int32_t label;
  };
  std::vector<Pair> pairs;
};

CloneCorpus clone_corpus(std::size_t n_pairs, std::uint64_t seed);
std::size_t clone_template_count();

// Programs with an identical statement skeleton and equal-size expressions.
std::vector<std::string> homogeneous_corpus(std::size_t n, std::uint64_t seed);

// Random well-formed program with nesting up to `max_depth` blocks.
std::string random_program(std::mt19937_64& rng, std::size_t max_depth = 3,
                           std::size_t max_statements = 4);

void write_clone_corpus(std::ostream& pairs, std::ostream& programs, const CloneCorpus& corpus);

}  // namespace xastnn
