#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "bench.hpp"
#include "checkpoint.hpp"
#include "dataset.hpp"
#include "minilang.hpp"
#include "synthetic.hpp"
#include "word2vec.hpp"

using namespace xastnn;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("xastnn_test_" + name)).string();
}

}  // namespace

TEST(Dataset, ReadsSourceAndAstRecords) {
  const Ast ast = parse_minilang("x = 1;");
  std::stringstream s;
  s << R"({"id":"a","label":1,"source":"y = 2;","split":"test"})" << "\n\n";
  s << json{{"id", "b"}, {"label", 0}, {"ast", export_ast_json(ast)}}.dump() << "\n";
  const auto d = read_classification(s);
  ASSERT_EQ(d.records.size(), 2u);
  EXPECT_EQ(d.classes, 2u);
  EXPECT_EQ(d.records[0].split, Split::kTest);
  EXPECT_TRUE(structurally_equal(*d.records[1].program.ast, ast));
}

TEST(Dataset, SplitAssignmentIsSeededEightyTenTen) {
  const auto corpus = classification_corpus(1000, 1);
  std::stringstream a, b;
  write_classification(a, corpus.sources, corpus.labels);
  b << a.str();
  const auto d1 = read_classification(a, 7), d2 = read_classification(b, 7);
  std::map<Split, std::size_t> n;
  for (std::size_t i = 0; i < d1.records.size(); ++i) {
    EXPECT_EQ(d1.records[i].split, d2.records[i].split);
    ++n[d1.records[i].split];
  }
  EXPECT_EQ(n[Split::kTrain], 800u);
  EXPECT_EQ(n[Split::kValid], 100u);
  EXPECT_EQ(n[Split::kTest], 100u);
  std::stringstream c;
  write_classification(c, corpus.sources, corpus.labels);
  const auto d3 = read_classification(c, 8);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < d1.records.size(); ++i) moved += d1.records[i].split != d3.records[i].split;
  EXPECT_GT(moved, 0u);
}

TEST(Dataset, ErrorsNameTheRecord) {
  auto read = [](const std::string& text) {
    std::stringstream s(text);
    read_classification(s);
  };
  EXPECT_EQ(code_of([&] { read(""); }), ErrorCode::kEmptyCorpus);
  EXPECT_EQ(code_of([&] { read("{not json}\n"); }), ErrorCode::kDataFormat);
  EXPECT_EQ(code_of([&] { read(R"({"id":"a","source":"x=1;"})"); }), ErrorCode::kDataFormat);
  EXPECT_EQ(code_of([&] { read(R"({"id":"a","label":-1,"source":"x=1;"})"); }), ErrorCode::kDataFormat);
  EXPECT_EQ(code_of([&] { read(R"({"id":"a","label":0,"source":"x=1;","split":"holdout"})"); }),
            ErrorCode::kDataFormat);
  try {
    read(R"({"id":"a","label":0,"source":"x=1;"})"
         "\n"
         R"({"id":"bad","label":1,"source":"x = ;"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataFormat);
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos) << e.what();
  }
}

TEST(Dataset, CloneReferencesChecked) {
  std::stringstream pairs(R"({"id1":"a","id2":"zzz","label":1})"), progs(R"({"id":"a","source":"x = 1;"})");
  EXPECT_EQ(code_of([&] { read_clone(pairs, progs); }), ErrorCode::kDataFormat);
  std::stringstream pairs2(R"({"id1":"a","id2":"a","label":2})"), progs2(R"({"id":"a","source":"x = 1;"})");
  EXPECT_EQ(code_of([&] { read_clone(pairs2, progs2); }), ErrorCode::kDataFormat);
  EXPECT_EQ(code_of([] { read_classification_file("/nonexistent/x.jsonl"); }), ErrorCode::kIo);
}

TEST(Corpus, GeneratorsAreDeterministicAndParse) {
  const auto a = classification_corpus(50, 3), b = classification_corpus(50, 3);
  EXPECT_EQ(a.sources, b.sources);
  EXPECT_EQ(a.labels, b.labels);
  for (const auto& src : a.sources) EXPECT_NO_THROW(parse_minilang(src));
  const auto c = clone_corpus(40, 3);
  EXPECT_EQ(c.pairs.size(), 40u);
  std::size_t pos = 0;
  for (const auto& p : c.pairs) pos += p.label == 1;
  EXPECT_GT(pos, 0u);
  EXPECT_LT(pos, 40u);
  const auto h = homogeneous_corpus(20, 1);
  const auto ids = default_identifiers("minilang");
  const auto first = split(parse_minilang(h[0]), ids).labels();
  for (const auto& src : h) EXPECT_EQ(split(parse_minilang(src), ids).labels().size(), first.size());
}

TEST(Word2Vec, DeterministicAndShaped) {
  const std::vector<std::vector<std::string>> streams = {
      {"a", "b", "c", "a", "b"}, {"c", "d"}, {"a", "b", "a", "b", "a", "b"}};
  SkipGramConfig c;
  c.dim = 6;
  c.epochs = 3;
  c.window = 2;
  const auto t1 = pretrain_embeddings<double>(streams, c);
  const auto t2 = pretrain_embeddings<double>(streams, c);
  EXPECT_EQ(t1.table, t2.table);
  EXPECT_EQ(t1.vocab, t2.vocab);
  EXPECT_EQ(t1.table.rows(), t1.vocab.size());
  EXPECT_EQ(t1.table.cols(), 6u);
  c.seed = 43;
  EXPECT_NE(pretrain_embeddings<double>(streams, c).table, t1.table);
}

// Tokens that share contexts end up closer than tokens that never co-occur.
TEST(Word2Vec, SharedContextsAreSimilar) {
  std::vector<std::vector<std::string>> streams;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 400; ++i) {
    streams.push_back({"x", rng() % 2 ? "p" : "q", "y"});
    streams.push_back({"u", "r", "v"});
  }
  SkipGramConfig c;
  c.dim = 16;
  c.epochs = 10;
  c.window = 1;
  const auto t = pretrain_embeddings<double>(streams, c);
  auto cosine = [&](const std::string& a, const std::string& b) {
    const auto ia = static_cast<std::size_t>(t.vocab.index(a)), ib = static_cast<std::size_t>(t.vocab.index(b));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < t.table.cols(); ++j) {
      dot += t.table(ia, j) * t.table(ib, j);
      na += t.table(ia, j) * t.table(ia, j);
      nb += t.table(ib, j) * t.table(ib, j);
    }
    return dot / std::sqrt(na * nb);
  };
  EXPECT_GT(cosine("p", "q"), cosine("p", "r"));
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Vocabulary vocab = Vocabulary::from_tokens({"Assign", "While", "Identifier:a"});
  ModelConfig mc;
  mc.d = 5;
  mc.m = 4;
  mc.classes = 4;
  TrainConfig tc;
  tc.d = 5;
  tc.m = 4;
  tc.precision = Precision::kF64;
  auto model = Model<double>::init(mc, vocab, 11);
  const std::string path = temp_path("ckpt.bin");
  save_checkpoint(path, model, tc);
  const LoadedCheckpoint back = load_checkpoint(path);
  ASSERT_EQ(back.precision(), Precision::kF64);
  auto loaded = std::get<Model<double>>(back.model);
  EXPECT_EQ(loaded.vocab, vocab);
  EXPECT_EQ(model_config_to_json(loaded.config), model_config_to_json(mc));
  EXPECT_EQ(back.config.to_json(), tc.to_json());
  auto a = model.all_parameters(), b = loaded.all_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value, b[i]->value);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, FloatModelKeepsPrecision) {
  ModelConfig mc;
  mc.d = 3;
  mc.m = 2;
  auto model = Model<float>::init(mc, Vocabulary::from_tokens({"A"}), 1);
  const std::string path = temp_path("ckpt32.bin");
  save_checkpoint(path, model, TrainConfig{});
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.precision(), Precision::kF32);
  EXPECT_EQ(std::get<Model<float>>(back.model).embeddings.value, model.embeddings.value);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionDetected) {
  ModelConfig mc;
  mc.d = 3;
  mc.m = 2;
  auto model = Model<double>::init(mc, Vocabulary::from_tokens({"A"}), 1);
  const std::string path = temp_path("ckpt_bad.bin");
  save_checkpoint(path, model, TrainConfig{});
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'Y';
  write(bad_magic);
  EXPECT_EQ(code_of([&] { load_checkpoint(path); }), ErrorCode::kCheckpoint);
  write(bytes.substr(0, bytes.size() - 7));
  EXPECT_EQ(code_of([&] { load_checkpoint(path); }), ErrorCode::kCheckpoint);
  std::string bad_version = bytes;
  bad_version[7] = 9;
  write(bad_version);
  EXPECT_EQ(code_of([&] { load_checkpoint(path); }), ErrorCode::kCheckpoint);
  write(bytes + "trailing");
  EXPECT_EQ(code_of([&] { load_checkpoint(path); }), ErrorCode::kCheckpoint);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([&] { load_checkpoint(path); }), ErrorCode::kIo);
}

TEST(Bench, ReferenceRowAndJsonRoundTrip) {
  const auto sources = homogeneous_corpus(24, 1);
  ModelConfig mc;
  mc.d = 8;
  mc.m = 8;
  std::set<std::string> tokens;
  const auto ids = default_identifiers("minilang");
  std::vector<Ast> asts;
  for (const auto& s : sources) {
    asts.push_back(parse_minilang(s));
    for (const auto& t : to_token_trees(split(asts.back(), ids))) tokens.insert(t.tokens.begin(), t.tokens.end());
  }
  auto model = Model<float>::init(mc, Vocabulary::from_tokens({tokens.begin(), tokens.end()}), 1);
  std::vector<IndexedSequence> corpus;
  for (const auto& a : asts) corpus.push_back(model.prepare(a));
  const auto rows = run_bench(model, corpus, {4, 8}, 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].batch_size, 1u);
  EXPECT_DOUBLE_EQ(rows[0].speedup_vs_b1, 1.0);
  for (const auto& r : rows) {
    EXPECT_GT(r.per_sample_ms, 0.0);
    EXPECT_NEAR(r.speedup_vs_b1, rows[0].per_sample_ms / r.per_sample_ms, 1e-12);
  }
  // Same skeleton everywhere, so each batch needs the same number of levels.
  EXPECT_EQ(rows[1].level_invocations * 4, rows[0].level_invocations);
  EXPECT_EQ(bench_from_json(json::parse(bench_to_json(rows).dump())), rows);
  EXPECT_NE(bench_to_text(rows).find("speedup"), std::string::npos);
  EXPECT_THROW(run_bench(model, corpus, {0}, 1), Error);
}
