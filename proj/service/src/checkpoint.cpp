#include "ganshift/service/checkpoint.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "ganshift/error.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/latent_io.hpp"

namespace ganshift::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'S', 'C', 'K'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>(value & 0xff));
    value >>= 8;
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) value = (value << 8) | p[i];
  return value;
}

std::size_t element_size(ValueType type) { return type == ValueType::kFloat64 ? 8 : 4; }

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Prefix {
  json header;
  std::size_t body_offset = 0;
};

Prefix parse_prefix(const unsigned char* data, std::size_t size, std::size_t file_size,
                    const std::string& path) {
  if (size < 16 || std::memcmp(data, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a ganshift checkpoint");
  }
  const auto version = get_le<std::uint32_t>(data + 4);
  if (version != kCheckpointVersion) {
    throw IoError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(data + 8);
  if (header_len > file_size - 16 || header_len > size - 16) {
    throw IoError("'" + path + "': truncated checkpoint header");
  }
  Prefix prefix;
  try {
    prefix.header = json::parse(data + 16, data + 16 + header_len);
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': malformed checkpoint header: " + e.what());
  }
  prefix.body_offset = 16 + header_len;
  return prefix;
}

json latent_blocks(const WPlusCode& w) { return latent_to_json(w, ""); }

}  // namespace

std::string to_string(ValueType type) { return type == ValueType::kFloat64 ? "f64" : "f32"; }

ValueType value_type_from_string(const std::string& text) {
  if (text == "f64") return ValueType::kFloat64;
  if (text == "f32") return ValueType::kFloat32;
  throw ConfigError("unknown checkpoint dtype '" + text + "' (expected f64 or f32)");
}

std::string write_container(const std::string& path, Container container, ValueType type) {
  std::vector<unsigned char> body;
  std::size_t total = 0;
  for (const auto& a : container.arrays) total += a.values.size();
  body.reserve(total * element_size(type));
  json table = json::array();
  for (const auto& a : container.arrays) {
    if (a.values.size() != a.rows * a.cols) {
      throw DimensionError("array '" + a.name + "' has " + std::to_string(a.values.size()) +
                           " values for shape " + std::to_string(a.rows) + "x" +
                           std::to_string(a.cols));
    }
    table.push_back({{"name", a.name}, {"group", a.group}, {"rows", a.rows}, {"cols", a.cols}});
    for (double v : a.values) {
      if (type == ValueType::kFloat64) {
        put_le(body, std::bit_cast<std::uint64_t>(v));
      } else {
        put_le(body, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  const std::string body_hash = sha256_hex(std::span<const unsigned char>(body));
  container.header["dtype"] = to_string(type);
  container.header["arrays"] = std::move(table);
  container.header["body_sha256"] = body_hash;
  const std::string header_text = container.header.dump();

  std::vector<unsigned char> prefix(kMagic, kMagic + 4);
  put_le(prefix, kCheckpointVersion);
  put_le(prefix, static_cast<std::uint64_t>(header_text.size()));

  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = temp_sibling(target.string());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move checkpoint into '" + path + "': " + ec.message());
  }
  return body_hash;
}

nlohmann::json read_container_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const auto file_size = static_cast<std::size_t>(fs::file_size(path));
  unsigned char fixed[16] = {};
  in.read(reinterpret_cast<char*>(fixed), 16);
  if (in.gcount() != 16 || std::memcmp(fixed, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a ganshift checkpoint");
  }
  const auto header_len = get_le<std::uint64_t>(fixed + 8);
  if (header_len > file_size - 16) throw IoError("'" + path + "': truncated checkpoint header");
  std::vector<unsigned char> buf(fixed, fixed + 16);
  buf.resize(16 + header_len);
  in.read(reinterpret_cast<char*>(buf.data() + 16), static_cast<std::streamsize>(header_len));
  return parse_prefix(buf.data(), buf.size(), file_size, path).header;
}

Container read_container(const std::string& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  Prefix prefix = parse_prefix(bytes.data(), bytes.size(), bytes.size(), path);
  Container c;
  c.header = std::move(prefix.header);
  try {
    const ValueType type = value_type_from_string(c.header.at("dtype").get<std::string>());
    const std::size_t esize = element_size(type);
    const auto body = std::span(bytes).subspan(prefix.body_offset);
    if (sha256_hex(body) != c.header.at("body_sha256").get<std::string>()) {
      throw IoError("'" + path + "': body hash mismatch (file is corrupt)");
    }
    std::size_t offset = 0;
    for (const auto& entry : c.header.at("arrays")) {
      ArrayRecord a;
      a.name = entry.at("name").get<std::string>();
      a.group = entry.at("group").get<std::string>();
      a.rows = entry.at("rows").get<std::size_t>();
      a.cols = entry.at("cols").get<std::size_t>();
      const std::size_t n = a.rows * a.cols;
      if (offset + n * esize > body.size()) throw IoError("'" + path + "': truncated body");
      a.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = body.data() + offset + i * esize;
        a.values[i] = type == ValueType::kFloat64
                          ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                          : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
      }
      offset += n * esize;
      c.arrays.push_back(std::move(a));
    }
    if (offset != body.size()) throw IoError("'" + path + "': trailing bytes after body");
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': malformed checkpoint header: " + e.what());
  }
  return c;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json shape_to_json(const GeneratorShape& s) {
  return {{"L", s.layer_count}, {"D", s.latent_width}, {"H", s.height},
          {"W", s.width},       {"C", s.channels},     {"z_dim", s.z_dim}};
}

GeneratorShape shape_from_json(const json& j) {
  GeneratorShape s;
  s.layer_count = j.at("L").get<std::size_t>();
  s.latent_width = j.at("D").get<std::size_t>();
  s.height = j.at("H").get<std::size_t>();
  s.width = j.at("W").get<std::size_t>();
  s.channels = j.at("C").get<std::size_t>();
  s.z_dim = j.at("z_dim").get<std::size_t>();
  return s;
}

json config_to_json(const AdaptConfig& c) {
  return {
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"optimizer_betas", {c.beta1, c.beta2}},
      {"lambda_clip_within", c.lambda_clip_within},
      {"lambda_ref_clip", c.lambda_ref_clip},
      {"lambda_ref_rec", c.lambda_ref_rec},
      {"inversion_lambda", c.inversion_lambda},
      {"inversion_steps", c.inversion_steps},
      {"mix_boundary_m", c.mix_boundary_m},
      {"seed", c.seed},
      {"anchor_mode", std::string(to_string(c.anchor_mode))},
      {"anchor_samples", c.anchor_samples},
      {"enable_ref_clip", c.enable_ref_clip},
      {"enable_clip_within", c.enable_clip_within},
      {"enable_ref_rec", c.enable_ref_rec},
      {"enable_style_mixing", c.enable_style_mixing},
  };
}

AdaptConfig config_from_json(const json& j, AdaptConfig base) {
  if (!j.is_object()) throw ConfigError("config overrides must be a JSON object");
  auto scalar = [](const std::string& key, const json& v) -> std::string {
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    throw ConfigError("config key '" + key + "': unsupported value " + v.dump());
  };
  ConfigEntries entries;
  for (const auto& [key, value] : j.items()) {
    if (value.is_array()) {
      std::string joined;
      for (const auto& item : value) joined += (joined.empty() ? "" : ",") + scalar(key, item);
      entries[key] = joined;
    } else {
      entries[key] = scalar(key, value);
    }
  }
  return apply_entries(base, entries);
}

json loss_to_json(const LossBreakdown& l, std::int64_t step) {
  return {{"step", step},         {"clip_across", l.clip_across}, {"clip_within", l.clip_within},
          {"ref_clip", l.ref_clip}, {"ref_rec", l.ref_rec},       {"total", l.total},
          {"weights",
           {{"clip_within", l.weights.clip_within},
            {"ref_clip", l.weights.ref_clip},
            {"ref_rec", l.weights.ref_rec}}}};
}

LossBreakdown loss_from_json(const json& j) {
  LossBreakdown l;
  l.clip_across = j.at("clip_across").get<double>();
  l.clip_within = j.at("clip_within").get<double>();
  l.ref_clip = j.at("ref_clip").get<double>();
  l.ref_rec = j.at("ref_rec").get<double>();
  l.total = j.at("total").get<double>();
  const json& w = j.at("weights");
  l.weights.clip_within = w.at("clip_within").get<double>();
  l.weights.ref_clip = w.at("ref_clip").get<double>();
  l.weights.ref_rec = w.at("ref_rec").get<double>();
  return l;
}

std::string save_checkpoint(const std::string& path, const Checkpoint& ck, ValueType type) {
  const CheckpointInfo& info = ck.info;
  Container c;
  c.header = {{"kind", "generator"},
              {"format_version", kCheckpointVersion},
              {"backend", info.backend},
              {"backend_seed", info.backend_seed},
              {"dims", shape_to_json(info.shape)},
              {"config", info.config ? config_to_json(*info.config) : json(nullptr)},
              {"parent", info.parent_hash.empty() ? json(nullptr) : json(info.parent_hash)},
              {"created", info.created.empty() ? utc_timestamp() : info.created},
              {"manifest_sha256",
               info.manifest_sha256.empty() ? json(nullptr) : json(info.manifest_sha256)}};
  if (info.reference_latent) {
    c.header["reference"] = {{"sha256", info.reference_sha256},
                             {"latent", latent_blocks(*info.reference_latent)}};
  } else {
    c.header["reference"] = nullptr;
  }
  for (const auto& leaf : ck.params.leaves()) {
    c.arrays.push_back({leaf.name, std::string(to_string(leaf.group)), leaf.rows, leaf.cols,
                        leaf.values});
  }
  return write_container(path, std::move(c), type);
}

namespace {

CheckpointInfo info_from_header(const json& h, const std::string& path) {
  try {
    if (h.value("kind", "") != "generator") {
      throw IoError("'" + path + "' is not a generator checkpoint");
    }
    CheckpointInfo info;
    info.backend = h.at("backend").get<std::string>();
    info.backend_seed = h.at("backend_seed").get<std::uint64_t>();
    info.shape = shape_from_json(h.at("dims"));
    if (!h.at("config").is_null()) info.config = config_from_json(h.at("config"));
    if (!h.at("parent").is_null()) info.parent_hash = h.at("parent").get<std::string>();
    info.created = h.at("created").get<std::string>();
    if (h.contains("manifest_sha256") && !h.at("manifest_sha256").is_null()) {
      info.manifest_sha256 = h.at("manifest_sha256").get<std::string>();
    }
    if (!h.at("reference").is_null()) {
      info.reference_sha256 = h.at("reference").at("sha256").get<std::string>();
      info.reference_latent = latent_from_json(h.at("reference").at("latent"));
    }
    info.body_sha256 = h.at("body_sha256").get<std::string>();
    return info;
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': malformed checkpoint header: " + e.what());
  }
}

}  // namespace

CheckpointInfo load_checkpoint_info(const std::string& path) {
  return info_from_header(read_container_header(path), path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path);
  Checkpoint ck;
  ck.info = info_from_header(c.header, path);
  for (auto& a : c.arrays) {
    ck.params.add({std::move(a.name), param_group_from_string(a.group), a.rows, a.cols,
                   std::move(a.values)});
  }
  return ck;
}

Generator load_generator(const std::string& path, BackendSet* backends, CheckpointInfo* info_out) {
  const CheckpointInfo info = load_checkpoint_info(path);
  BackendSet set = BackendRegistry::instance().create(info.backend, info.backend_seed);
  if (!(set.generator->shape() == info.shape)) {
    throw DimensionError("'" + path + "': checkpoint dims " + shape_to_json(info.shape).dump() +
                         " do not match backend '" + info.backend + "' dims " +
                         shape_to_json(set.generator->shape()).dump());
  }
  Checkpoint ck = load_checkpoint(path);
  if (!ck.params.same_structure(set.generator->initial_params())) {
    throw DimensionError("'" + path + "': parameter tree does not match backend '" +
                         info.backend + "'");
  }
  Generator g{set.generator, std::move(ck.params)};
  if (backends) *backends = std::move(set);
  if (info_out) *info_out = std::move(ck.info);
  return g;
}

std::string save_train_state(const std::string& path, const TrainState& state,
                             const AdaptConfig& config) {
  Container c;
  json history = json::array();
  for (std::size_t k = 0; k < state.history.size(); ++k) {
    history.push_back(loss_to_json(state.history[k], static_cast<std::int64_t>(k + 1)));
  }
  c.header = {{"kind", "train_state"},
              {"format_version", kCheckpointVersion},
              {"step", state.step},
              {"optimizer_step", state.optimizer.step()},
              {"rng_state", state.rng_state},
              {"config", config_to_json(config)},
              {"history", std::move(history)}};
  const auto leaves = state.g_b.leaves();
  for (const auto& leaf : leaves) {
    c.arrays.push_back({leaf.name, std::string(to_string(leaf.group)), leaf.rows, leaf.cols,
                        leaf.values});
  }
  for (std::size_t i = 0; i < state.optimizer.slot_count(); ++i) {
    const auto m = state.optimizer.first_moment(i);
    if (m.empty()) continue;
    const auto v = state.optimizer.second_moment(i);
    const auto& leaf = leaves[i];
    c.arrays.push_back({"adam.m/" + leaf.name, "optimizer", leaf.rows, leaf.cols, {m.begin(), m.end()}});
    c.arrays.push_back({"adam.v/" + leaf.name, "optimizer", leaf.rows, leaf.cols, {v.begin(), v.end()}});
  }
  return write_container(path, std::move(c), ValueType::kFloat64);
}

TrainState load_train_state(const std::string& path, const AdaptConfig& config) {
  Container c = read_container(path);
  if (c.header.value("kind", "") != "train_state") {
    throw IoError("'" + path + "' is not a train-state checkpoint");
  }
  TrainState state;
  try {
    AdaptConfig saved = config_from_json(c.header.at("config"));
    saved.iterations = config.iterations;
    if (!(saved == config)) {
      throw ConfigError("'" + path + "' was written with a different configuration");
    }
    state.step = c.header.at("step").get<std::int64_t>();
    state.rng_state = c.header.at("rng_state").get<std::string>();
    for (const auto& entry : c.header.at("history")) state.history.push_back(loss_from_json(entry));
    const auto optimizer_step = c.header.at("optimizer_step").get<std::size_t>();

    std::vector<ArrayRecord> moments;
    for (auto& a : c.arrays) {
      if (a.group == "optimizer") {
        moments.push_back(std::move(a));
      } else {
        state.g_b.add({std::move(a.name), param_group_from_string(a.group), a.rows, a.cols,
                       std::move(a.values)});
      }
    }
    std::vector<std::vector<double>> first(state.g_b.leaf_count());
    std::vector<std::vector<double>> second(state.g_b.leaf_count());
    for (auto& a : moments) {
      const bool is_first = a.name.rfind("adam.m/", 0) == 0;
      const bool is_second = a.name.rfind("adam.v/", 0) == 0;
      if (!is_first && !is_second) throw IoError("'" + path + "': unknown optimizer array " + a.name);
      const auto idx = state.g_b.index_of(a.name.substr(7));
      if (!idx) throw IoError("'" + path + "': optimizer array for unknown leaf " + a.name);
      (is_first ? first : second)[*idx] = std::move(a.values);
    }
    state.optimizer =
        Adam({config.learning_rate, config.beta1, config.beta2, 1e-8}, state.g_b.leaf_count());
    state.optimizer.restore(optimizer_step, std::move(first), std::move(second));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': malformed train state: " + e.what());
  }
  if (state.history.size() != static_cast<std::size_t>(state.step)) {
    throw IoError("'" + path + "': history length does not match step");
  }
  return state;
}

}  // namespace ganshift::service
