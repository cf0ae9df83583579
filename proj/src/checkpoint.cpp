#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace xastnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename X>
void put(std::ostream& out, X v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(X));
}

template <typename X>
X get(std::istream& in, const char* what) {
  X v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(X))) {
    fail(ErrorCode::kCheckpoint, std::string("truncated checkpoint while reading ") + what);
  }
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  constexpr std::uint64_t kLimit = 1ULL << 32;
  if (n > kLimit) fail(ErrorCode::kCheckpoint, std::string("implausible length for ") + what);
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    fail(ErrorCode::kCheckpoint, std::string("truncated checkpoint while reading ") + what);
  }
  return s;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
  return std::is_same_v<T, float> ? 0 : 1;
}

template <typename T>
Model<T> restore(const ModelConfig& mc, Vocabulary vocab,
                 std::unordered_map<std::string, Tensor<T>>& tensors) {
  Model<T> model = Model<T>::init(mc, std::move(vocab), 0);
  for (Parameter<T>* p : model.all_parameters()) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) fail(ErrorCode::kCheckpoint, "checkpoint lacks tensor " + p->name);
    if (!it->second.same_shape(p->value)) {
      fail(ErrorCode::kCheckpoint, "tensor " + p->name + " has shape " + std::to_string(it->second.rows()) +
                                       "x" + std::to_string(it->second.cols()) + ", expected " +
                                       std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
    p->value = std::move(it->second);
    p->zero_grad();
    tensors.erase(it);
  }
  if (!tensors.empty()) fail(ErrorCode::kCheckpoint, "unexpected tensor " + tensors.begin()->first);
  return model;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"m", c.m},
          {"classes", c.classes},
          {"task", task_name(c.task)},
          {"encoder", encoder_name(c.encoder)},
          {"use_grtu", c.use_grtu},
          {"grvu_bias", c.grvu_bias},
          {"profile", c.profile},
          {"granularity", granularity_name(c.granularity)},
          {"root_kinds", c.root_kinds},
          {"threshold", c.threshold}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.d = doc.at("d").get<std::size_t>();
    c.m = doc.at("m").get<std::size_t>();
    c.classes = doc.at("classes").get<std::size_t>();
    c.task = parse_task(doc.at("task").get<std::string>());
    const std::string enc = doc.at("encoder").get<std::string>();
    if (enc == "grvu") c.encoder = SubtreeEncoder::kGrvu;
    else if (enc == "rvnn") c.encoder = SubtreeEncoder::kRvnn;
    else if (enc == "mean") c.encoder = SubtreeEncoder::kMeanTokens;
    else fail(ErrorCode::kCheckpoint, "unknown encoder '" + enc + "'");
    c.use_grtu = doc.at("use_grtu").get<bool>();
    c.grvu_bias = doc.at("grvu_bias").get<bool>();
    c.profile = doc.at("profile").get<std::string>();
    c.granularity = parse_granularity(doc.at("granularity").get<std::string>());
    c.root_kinds = doc.at("root_kinds").get<std::vector<std::string>>();
    c.threshold = doc.at("threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCheckpoint, std::string("bad model metadata: ") + e.what());
  }
  return c;
}

template <typename T>
void save_checkpoint(const std::string& path, Model<T>& model, const TrainConfig& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  const nlohmann::json meta{{"train", config.to_json()},
                            {"model", model_config_to_json(model.config)},
                            {"freeze_embeddings", model.freeze_embeddings},
                            {"vocab", model.vocab.tokens()}};
  const std::string meta_text = meta.dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  const auto params = model.all_parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter<T>* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint8_t>(out, dtype_code<T>());
    put<std::uint8_t>(out, 2);
    put<std::uint64_t>(out, p->value.rows());
    put<std::uint64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(T)));
  }
  if (!out) fail(ErrorCode::kIo, "write to " + path + " failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  char magic[sizeof(kCheckpointMagic) - 1];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail(ErrorCode::kCheckpoint, path + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::string meta_text = get_bytes(in, get<std::uint64_t>(in, "metadata length"), "metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCheckpoint, std::string("bad metadata: ") + e.what());
  }
  TrainConfig config;
  ModelConfig mc;
  Vocabulary vocab;
  bool frozen = false;
  try {
    config = TrainConfig::from_json(meta.at("train"));
    mc = model_config_from_json(meta.at("model"));
    vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    frozen = meta.at("freeze_embeddings").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCheckpoint, std::string("bad metadata: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCheckpoint) throw;
    fail(ErrorCode::kCheckpoint, std::string("bad metadata: ") + e.what());
  }

  const auto count = get<std::uint32_t>(in, "tensor count");
  std::unordered_map<std::string, Tensor<float>> f32;
  std::unordered_map<std::string, Tensor<double>> f64;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_bytes(in, get<std::uint32_t>(in, "name length"), "tensor name");
    const auto dtype = get<std::uint8_t>(in, "dtype");
    const auto rank = get<std::uint8_t>(in, "rank");
    if (dtype > 1) fail(ErrorCode::kCheckpoint, "tensor " + name + " has unknown dtype");
    if (rank != 2) fail(ErrorCode::kCheckpoint, "tensor " + name + " must have rank 2");
    const auto rows = get<std::uint64_t>(in, "dims");
    const auto cols = get<std::uint64_t>(in, "dims");
    if (rows > (1ULL << 28) || cols > (1ULL << 28)) fail(ErrorCode::kCheckpoint, "implausible tensor shape");
    auto read_values = [&](auto& table, auto zero) {
      using T = decltype(zero);
      Tensor<T> t(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
      if (t.size() > 0 && !in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)))) {
        fail(ErrorCode::kCheckpoint, "truncated values for tensor " + name);
      }
      if (!table.emplace(name, std::move(t)).second) fail(ErrorCode::kCheckpoint, "duplicate tensor " + name);
    };
    if (dtype == 0) {
      read_values(f32, 0.0f);
    } else {
      read_values(f64, 0.0);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::kCheckpoint, "trailing bytes after tensors");
  if (!f32.empty() && !f64.empty()) fail(ErrorCode::kCheckpoint, "mixed tensor dtypes");

  LoadedCheckpoint out{config, Model<float>{}};
  if (!f64.empty()) {
    auto model = restore<double>(mc, std::move(vocab), f64);
    model.freeze_embeddings = frozen;
    out.model = std::move(model);
  } else {
    auto model = restore<float>(mc, std::move(vocab), f32);
    model.freeze_embeddings = frozen;
    out.model = std::move(model);
  }
  return out;
}

template void save_checkpoint(const std::string&, Model<float>&, const TrainConfig&);
template void save_checkpoint(const std::string&, Model<double>&, const TrainConfig&);

}  // namespace xastnn
