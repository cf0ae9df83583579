#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "model.hpp"

namespace xastnn {

struct BenchRow {
  std::size_t batch_size = 0;
  double per_sample_ms = 0;  // median over runs
  double speedup_vs_b1 = 0;
  std::size_t level_invocations = 0;  // summed over one pass of the corpus

  bool operator==(const BenchRow&) const = default;
};

// Times the representation phase (subtree encoder, sequence encoder, pooling)
// over the whole pre-split corpus for each batch size. A B = 1 row is always
// measured since speedups are relative to it.
template <typename T>
std::vector<BenchRow> run_bench(Model<T>& model, const std::vector<IndexedSequence>& corpus,
                                std::vector<std::size_t> batch_sizes, std::size_t runs = 5);

// Raises glibc's mmap and trim thresholds so large tensors are recycled from
// the heap instead of being mapped and unmapped per batch. Idempotent; a no-op
// on other allocators.
void tune_allocator();

nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);
std::vector<BenchRow> bench_from_json(const nlohmann::json& doc);
std::string bench_to_text(const std::vector<BenchRow>& rows);

}  // namespace xastnn
