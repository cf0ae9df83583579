#pragma once

// Depth-synchronous dynamic batching of subtree encoders.
//
// All subtrees of a batch are flattened into one list. Nodes are grouped by
// their depth below their own subtree root, across the whole batch, and each
// group is evaluated with a single level call: level k gathers its input
// embeddings in one go and sums the children states of level k+1 into parent
// slots with one segment_sum. The number of level calls is therefore the
// deepest subtree's depth, independent of batch size and level width.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "autodiff.hpp"
#include "grvu.hpp"
#include "vocabulary.hpp"

namespace xastnn {

struct FlatBatch {
  std::vector<IndexedTree> subtrees;  // (sequence, position) order
  std::vector<std::size_t> lengths;   // subtrees per sequence

  std::size_t size() const noexcept { return subtrees.size(); }
};

FlatBatch flatten(std::span<const IndexedSequence> batch);

struct LevelPlan {
  struct Level {
    std::vector<std::int32_t> token_ids;
    // For level k > 0: index of each node's parent within level k - 1.
    std::vector<std::int32_t> parent_slot;
  };
  std::vector<Level> levels;  // levels[0] holds one root per subtree
  std::size_t node_count = 0;

  std::size_t depth() const noexcept { return levels.size(); }
};

LevelPlan plan_levels(const FlatBatch& flat);

struct BatchReport {
  std::size_t batch_size = 0;
  double avg_length = 0;  // L: subtrees per sequence
  double avg_width = 0;   // W: widest level per subtree
  double avg_depth = 0;   // D: depth per subtree
  std::size_t level_invocations = 0;
  std::size_t node_evaluations = 0;
  std::size_t subtree_count = 0;
  double wall_ms = 0;
};

BatchReport describe(const FlatBatch& flat);

enum class SubtreeEncoder { kGrvu, kRvnn, kMeanTokens };

// Level-synchronous evaluation on a tape. Returns one row per subtree, in flat
// order. `level_invocations` (optional) receives the number of level calls.
template <typename T>
Var<T> bottom_up(const LevelPlan& plan, Var<T> embeddings, const GrvuVars<T>& params,
                 std::size_t* level_invocations = nullptr);
template <typename T>
Var<T> bottom_up_rvnn(const LevelPlan& plan, Var<T> embeddings, const RvnnVars<T>& params,
                      std::size_t* level_invocations = nullptr);
// Mean of member token embeddings per subtree (the no-recursive-unit ablation).
template <typename T>
Var<T> mean_token_embeddings(const FlatBatch& flat, Var<T> embeddings);

// Numeric convenience: N x d embeddings.
template <typename T>
Tensor<T> bottom_up(const FlatBatch& flat, Parameter<T>& embeddings, GrvuParams<T>& params,
                    std::size_t* level_invocations = nullptr);

// Slices consecutive runs of `items` by `lengths`.
template <typename X>
std::vector<std::vector<X>> recover(std::span<const X> items, std::span<const std::size_t> lengths) {
  std::size_t total = 0;
  for (std::size_t l : lengths) total += l;
  if (total != items.size()) {
    fail(ErrorCode::kLengthMismatch, "lengths sum to " + std::to_string(total) + " for " +
                                         std::to_string(items.size()) + " items");
  }
  std::vector<std::vector<X>> out;
  out.reserve(lengths.size());
  std::size_t shift = 0;
  for (std::size_t l : lengths) {
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(shift),
                     items.begin() + static_cast<std::ptrdiff_t>(shift + l));
    shift += l;
  }
  return out;
}

// Row-block version: splits an N x d matrix into per-sequence M_i x d blocks.
template <typename T>
std::vector<Tensor<T>> recover_rows(const Tensor<T>& embeddings, std::span<const std::size_t> lengths);

template <typename T>
struct BatchResult {
  std::vector<Tensor<T>> sequences;  // per sample, M_i x d
  std::optional<BatchReport> report;
};

template <typename T>
BatchResult<T> run_batched(std::span<const IndexedSequence> batch, Parameter<T>& embeddings,
                           GrvuParams<T>& params, bool report = false);

// Sequential reference: every subtree encoded on its own by recursion.
template <typename T>
std::vector<Tensor<T>> run_sequential(std::span<const IndexedSequence> batch,
                                      Parameter<T>& embeddings, GrvuParams<T>& params);

}  // namespace xastnn
