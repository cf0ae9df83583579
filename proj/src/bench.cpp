#include "bench.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace xastnn {

template <typename T>
std::vector<BenchRow> run_bench(Model<T>& model, const std::vector<IndexedSequence>& corpus,
                                std::vector<std::size_t> batch_sizes, std::size_t runs) {
  if (corpus.empty()) fail(ErrorCode::kEmptyBatch, "bench corpus is empty");
  if (runs == 0) fail(ErrorCode::kInvalidArgument, "runs must be positive");
  for (std::size_t b : batch_sizes) {
    if (b == 0) fail(ErrorCode::kInvalidArgument, "batch sizes must be positive");
  }
  batch_sizes.push_back(1);
  std::sort(batch_sizes.begin(), batch_sizes.end());
  batch_sizes.erase(std::unique(batch_sizes.begin(), batch_sizes.end()), batch_sizes.end());

  tune_allocator();
  auto pass = [&](std::size_t b, std::size_t* calls) {
    for (std::size_t start = 0; start < corpus.size(); start += b) {
      const std::size_t n = std::min(b, corpus.size() - start);
      Tape<T> tape(false);
      BatchReport report;
      (void)model.encode(tape, std::span<const IndexedSequence>(corpus.data() + start, n), &report);
      if (calls != nullptr) *calls += report.level_invocations;
    }
  };
  std::vector<BenchRow> rows(batch_sizes.size());
  std::vector<std::vector<double>> times(batch_sizes.size());
  pass(batch_sizes.back(), nullptr);  // warm-up
  // Batch sizes are interleaved within each run so background load hits all of them alike.
  for (std::size_t run = 0; run < runs; ++run) {
    for (std::size_t i = 0; i < batch_sizes.size(); ++i) {
      std::size_t calls = 0;
      const auto t0 = std::chrono::steady_clock::now();
      pass(batch_sizes[i], &calls);
      times[i].push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      rows[i].batch_size = batch_sizes[i];
      rows[i].level_invocations = calls;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& t = times[i];
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    rows[i].per_sample_ms = t[t.size() / 2] / static_cast<double>(corpus.size());
  }
  const double base = rows.front().per_sample_ms;
  for (BenchRow& r : rows) r.speedup_vs_b1 = r.per_sample_ms > 0 ? base / r.per_sample_ms : 0;
  return rows;
}

nlohmann::json bench_to_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const BenchRow& r : rows) {
    out.push_back({{"batch_size", r.batch_size},
                   {"per_sample_ms", r.per_sample_ms},
                   {"speedup_vs_B1", r.speedup_vs_b1},
                   {"level_invocations", r.level_invocations}});
  }
  return out;
}

std::vector<BenchRow> bench_from_json(const nlohmann::json& doc) {
  std::vector<BenchRow> rows;
  try {
    for (const auto& r : doc) {
      rows.push_back({r.at("batch_size").get<std::size_t>(), r.at("per_sample_ms").get<double>(),
                      r.at("speedup_vs_B1").get<double>(), r.at("level_invocations").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataFormat, std::string("bad bench table: ") + e.what());
  }
  return rows;
}

std::string bench_to_text(const std::vector<BenchRow>& rows) {
  std::string out = "batch_size  per_sample_ms  speedup_vs_B1  level_invocations\n";
  char line[128];
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof(line), "%10zu  %13.4f  %13.2f  %17zu\n", r.batch_size, r.per_sample_ms,
                  r.speedup_vs_b1, r.level_invocations);
    out += line;
  }
  return out;
}

void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    // Keep freed blocks in the heap instead of returning them to the kernel.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

template std::vector<BenchRow> run_bench(Model<float>&, const std::vector<IndexedSequence>&,
                                         std::vector<std::size_t>, std::size_t);
template std::vector<BenchRow> run_bench(Model<double>&, const std::vector<IndexedSequence>&,
                                         std::vector<std::size_t>, std::size_t);

}  // namespace xastnn
