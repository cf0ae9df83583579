#include "batcher.hpp"

#include <algorithm>

namespace xastnn {

FlatBatch flatten(std::span<const IndexedSequence> batch) {
  if (batch.empty()) fail(ErrorCode::kEmptyBatch, "cannot flatten an empty batch");
  FlatBatch flat;
  flat.lengths.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const IndexedSequence& seq = batch[i];
    if (seq.empty()) fail(ErrorCode::kEmptySequence, "sequence " + std::to_string(i) + " is empty");
    flat.lengths.push_back(seq.size());
    for (const IndexedTree& t : seq) {
      if (t.size() == 0) fail(ErrorCode::kEmptyInput, "empty subtree in sequence " + std::to_string(i));
      flat.subtrees.push_back(t);
    }
  }
  return flat;
}

LevelPlan plan_levels(const FlatBatch& flat) {
  // Children lists per subtree in local indices.
  struct Slot {
    std::size_t tree;
    std::int32_t local;
  };
  std::vector<std::vector<std::vector<std::int32_t>>> kids(flat.size());
  for (std::size_t s = 0; s < flat.size(); ++s) {
    const IndexedTree& t = flat.subtrees[s];
    kids[s].resize(t.size());
    for (std::size_t i = 1; i < t.size(); ++i) {
      kids[s][static_cast<std::size_t>(t.parent[i])].push_back(static_cast<std::int32_t>(i));
    }
  }
  LevelPlan plan;
  std::vector<Slot> current;
  current.reserve(flat.size());
  LevelPlan::Level roots;
  for (std::size_t s = 0; s < flat.size(); ++s) {
    current.push_back({s, 0});
    roots.token_ids.push_back(flat.subtrees[s].token_ids[0]);
  }
  plan.node_count = current.size();
  if (!current.empty()) plan.levels.push_back(std::move(roots));
  while (true) {
    std::vector<Slot> next;
    LevelPlan::Level level;
    for (std::size_t slot = 0; slot < current.size(); ++slot) {
      const Slot& p = current[slot];
      for (std::int32_t c : kids[p.tree][static_cast<std::size_t>(p.local)]) {
        next.push_back({p.tree, c});
        level.token_ids.push_back(flat.subtrees[p.tree].token_ids[static_cast<std::size_t>(c)]);
        level.parent_slot.push_back(static_cast<std::int32_t>(slot));
      }
    }
    if (next.empty()) break;
    plan.node_count += next.size();
    plan.levels.push_back(std::move(level));
    current = std::move(next);
  }
  return plan;
}

BatchReport describe(const FlatBatch& flat) {
  BatchReport r;
  r.batch_size = flat.lengths.size();
  r.subtree_count = flat.size();
  if (flat.lengths.empty() || flat.subtrees.empty()) return r;
  r.avg_length = static_cast<double>(flat.size()) / static_cast<double>(flat.lengths.size());
  double width = 0, depth = 0;
  std::size_t max_depth = 0;
  for (const IndexedTree& t : flat.subtrees) {
    std::vector<std::size_t> d(t.size(), 1);
    for (std::size_t i = 1; i < t.size(); ++i) d[i] = d[static_cast<std::size_t>(t.parent[i])] + 1;
    const std::size_t td = *std::max_element(d.begin(), d.end());
    std::vector<std::size_t> per_level(td + 1, 0);
    for (std::size_t x : d) ++per_level[x];
    width += static_cast<double>(*std::max_element(per_level.begin(), per_level.end()));
    depth += static_cast<double>(td);
    max_depth = std::max(max_depth, td);
    r.node_evaluations += t.size();
  }
  r.avg_width = width / static_cast<double>(flat.size());
  r.avg_depth = depth / static_cast<double>(flat.size());
  r.level_invocations = max_depth;
  return r;
}

namespace {

template <typename T, typename LevelFn>
Var<T> run_levels(const LevelPlan& plan, Var<T> embeddings, std::size_t dim, LevelFn&& level_fn,
                  std::size_t* level_invocations) {
  if (plan.levels.empty()) fail(ErrorCode::kEmptyBatch, "empty level plan");
  Tape<T>& tape = *embeddings.tape;
  std::size_t calls = 0;
  std::optional<Var<T>> below;
  for (std::size_t k = plan.levels.size(); k-- > 0;) {
    const auto& level = plan.levels[k];
    const std::size_t n = level.token_ids.size();
    Var<T> x = gather_rows(embeddings, std::span<const std::int32_t>(level.token_ids));
    Var<T> child_sum = below ? segment_sum(*below, std::span<const std::int32_t>(plan.levels[k + 1].parent_slot), n)
                             : tape.constant(Tensor<T>(n, dim));
    below = level_fn(x, child_sum);
    ++calls;
  }
  if (level_invocations != nullptr) *level_invocations = calls;
  return *below;
}

}  // namespace

// Input-side gate terms U x depend only on the token, so they are computed
// once per distinct token of the batch and gathered per level. Leaves have a
// zero child sum, which reduces them to h = (1 - sigmoid(U_z x)) * tanh(U_h x);
// only nodes with children pay for the W products.
template <typename T>
Var<T> bottom_up(const LevelPlan& plan, Var<T> embeddings, const GrvuVars<T>& params,
                 std::size_t* level_invocations) {
  if (plan.levels.empty()) fail(ErrorCode::kEmptyBatch, "empty level plan");
  if (embeddings.cols() != params.dim) {
    fail(ErrorCode::kDimensionMismatch, "embedding width " + std::to_string(embeddings.cols()) +
                                            " != " + std::to_string(params.dim));
  }
  std::vector<std::int32_t> distinct;
  for (const auto& level : plan.levels) distinct.insert(distinct.end(), level.token_ids.begin(), level.token_ids.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  auto slot_of = [&](std::int32_t token) {
    return static_cast<std::int32_t>(std::lower_bound(distinct.begin(), distinct.end(), token) - distinct.begin());
  };
  auto bias = [](Var<T> v, const std::optional<Var<T>>& b) { return b ? add_row(v, *b) : v; };
  const Var<T> x = gather_rows(embeddings, std::span<const std::int32_t>(distinct));
  const Var<T> pz = bias(matmul_nt(x, params.u_z), params.b_z);
  const Var<T> pr = bias(matmul_nt(x, params.u_r), params.b_r);
  const Var<T> ph = bias(matmul_nt(x, params.u_h), params.b_h);

  std::size_t calls = 0;
  std::optional<Var<T>> below;
  std::vector<std::int32_t> inner_tok, leaf_tok, inner_of, child_seg, order;
  for (std::size_t k = plan.levels.size(); k-- > 0;) {
    const auto& level = plan.levels[k];
    const std::size_t n = level.token_ids.size();
    const std::size_t mark = embeddings.tape->size();
    inner_of.assign(n, -1);
    std::size_t inner = 0;
    if (below) {
      for (std::int32_t p : plan.levels[k + 1].parent_slot) {
        if (inner_of[static_cast<std::size_t>(p)] < 0) inner_of[static_cast<std::size_t>(p)] = 0;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (inner_of[i] == 0) inner_of[i] = static_cast<std::int32_t>(inner++);
      }
    }
    inner_tok.clear();
    leaf_tok.clear();
    order.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t s = slot_of(level.token_ids[i]);
      if (inner_of[i] >= 0) {
        order[i] = inner_of[i];
        inner_tok.push_back(s);
      } else {
        order[i] = static_cast<std::int32_t>(inner + leaf_tok.size());
        leaf_tok.push_back(s);
      }
    }
    std::vector<Var<T>> parts;
    if (inner > 0) {
      child_seg.clear();
      for (std::int32_t p : plan.levels[k + 1].parent_slot) child_seg.push_back(inner_of[static_cast<std::size_t>(p)]);
      const Var<T> s = segment_sum(*below, std::span<const std::int32_t>(child_seg), inner);
      const std::span<const std::int32_t> it(inner_tok);
      const Var<T> z = sigmoid(add(gather_rows(pz, it), matmul_nt(s, params.w_z)));
      const Var<T> r = sigmoid(add(gather_rows(pr, it), matmul_nt(s, params.w_r)));
      const Var<T> cand = tanh_act(add(gather_rows(ph, it), matmul_nt(hadamard(s, r), params.w_h)));
      parts.push_back(add(hadamard(z, s), hadamard(one_minus(z), cand)));
    }
    if (!leaf_tok.empty()) {
      const std::span<const std::int32_t> lt(leaf_tok);
      const Var<T> z = sigmoid(gather_rows(pz, lt));
      parts.push_back(hadamard(one_minus(z), tanh_act(gather_rows(ph, lt))));
    }
    const Var<T> stacked = parts.size() == 1 ? parts.front() : concat_rows<T>(parts);
    bool identity = true;
    for (std::size_t i = 0; i < n && identity; ++i) identity = order[i] == static_cast<std::int32_t>(i);
    below = embeddings.tape->collapse(
        mark, identity ? stacked : gather_rows(stacked, std::span<const std::int32_t>(order)));
    ++calls;
  }
  if (level_invocations != nullptr) *level_invocations = calls;
  return *below;
}

template <typename T>
Var<T> bottom_up_rvnn(const LevelPlan& plan, Var<T> embeddings, const RvnnVars<T>& params,
                      std::size_t* level_invocations) {
  return run_levels<T>(
      plan, embeddings, params.dim,
      [&](Var<T> x, Var<T> s) { return rvnn_level(x, s, params); }, level_invocations);
}

template <typename T>
Var<T> mean_token_embeddings(const FlatBatch& flat, Var<T> embeddings) {
  std::vector<std::int32_t> tokens, seg;
  std::vector<T> inv;
  for (std::size_t s = 0; s < flat.size(); ++s) {
    const IndexedTree& t = flat.subtrees[s];
    tokens.insert(tokens.end(), t.token_ids.begin(), t.token_ids.end());
    seg.insert(seg.end(), t.size(), static_cast<std::int32_t>(s));
    inv.push_back(T(1) / static_cast<T>(t.size()));
  }
  Var<T> x = gather_rows(embeddings, std::span<const std::int32_t>(tokens));
  Var<T> sums = segment_sum(x, std::span<const std::int32_t>(seg), flat.size());
  return scale_rows(sums, std::span<const T>(inv));
}

template <typename T>
Tensor<T> bottom_up(const FlatBatch& flat, Parameter<T>& embeddings, GrvuParams<T>& params,
                    std::size_t* level_invocations) {
  Tape<T> tape(false);
  const GrvuVars<T> v = bind(tape, params);
  return bottom_up(plan_levels(flat), tape.param(embeddings), v, level_invocations).value();
}

template <typename T>
std::vector<Tensor<T>> recover_rows(const Tensor<T>& embeddings, std::span<const std::size_t> lengths) {
  std::vector<std::size_t> rows(embeddings.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto groups = recover<std::size_t>(rows, lengths);
  std::vector<Tensor<T>> out;
  out.reserve(groups.size());
  const std::size_t d = embeddings.cols();
  for (const auto& g : groups) {
    Tensor<T> block(g.size(), d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::copy_n(embeddings.data() + g[i] * d, d, block.data() + i * d);
    }
    out.push_back(std::move(block));
  }
  return out;
}

template <typename T>
BatchResult<T> run_batched(std::span<const IndexedSequence> batch, Parameter<T>& embeddings,
                           GrvuParams<T>& params, bool report) {
  const auto start = std::chrono::steady_clock::now();
  const FlatBatch flat = flatten(batch);
  std::size_t calls = 0;
  const Tensor<T> rows = bottom_up(flat, embeddings, params, &calls);
  BatchResult<T> out;
  out.sequences = recover_rows(rows, flat.lengths);
  if (report) {
    BatchReport r = describe(flat);
    r.level_invocations = calls;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.report = r;
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> run_sequential(std::span<const IndexedSequence> batch,
                                      Parameter<T>& embeddings, GrvuParams<T>& params) {
  std::vector<Tensor<T>> out;
  for (const IndexedSequence& seq : batch) {
    if (seq.empty()) fail(ErrorCode::kEmptySequence, "empty sequence");
    Tensor<T> block(seq.size(), params.dim);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      Tape<T> tape(false);
      const GrvuVars<T> v = bind(tape, params);
      const Tensor<T> o = encode_tree(seq[i], tape.param(embeddings), v).value();
      std::copy_n(o.data(), params.dim, block.data() + i * params.dim);
    }
    out.push_back(std::move(block));
  }
  return out;
}

#define XASTNN_INSTANTIATE_BATCHER(T)                                                            \
  template Var<T> bottom_up(const LevelPlan&, Var<T>, const GrvuVars<T>&, std::size_t*);          \
  template Var<T> bottom_up_rvnn(const LevelPlan&, Var<T>, const RvnnVars<T>&, std::size_t*);     \
  template Var<T> mean_token_embeddings(const FlatBatch&, Var<T>);                               \
  template Tensor<T> bottom_up(const FlatBatch&, Parameter<T>&, GrvuParams<T>&, std::size_t*);   \
  template std::vector<Tensor<T>> recover_rows(const Tensor<T>&, std::span<const std::size_t>);  \
  template BatchResult<T> run_batched(std::span<const IndexedSequence>, Parameter<T>&,           \
                                      GrvuParams<T>&, bool);                                     \
  template std::vector<Tensor<T>> run_sequential(std::span<const IndexedSequence>,               \
                                                 Parameter<T>&, GrvuParams<T>&);

XASTNN_INSTANTIATE_BATCHER(float)
XASTNN_INSTANTIATE_BATCHER(double)

}  // namespace xastnn
