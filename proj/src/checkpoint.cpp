#include "eostb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eostb/errors.hpp"

namespace eostb {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'O', 'S', 'T', 'B', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_doubles(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

struct Reader {
  const std::string& s;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (s.size() - pos < n) throw FormatError("checkpoint: truncated file");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::vector<double> doubles(std::size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), s.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return v;
  }
};

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers}, {"n_heads", c.n_heads},     {"d_model", c.d_model},
          {"d_ff", c.d_ff},         {"max_seq", c.max_seq},     {"vocab_size", c.vocab_size},
          {"scene_slots", c.scene_slots}, {"feature_dim", c.feature_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_model = j.value("d_model", c.d_model);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_seq = j.value("max_seq", c.max_seq);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.scene_slots = j.value("scene_slots", c.scene_slots);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.validate();
  return c;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  const bool has_opt = !ck.optimizer.empty();
  if (has_opt && (ck.optimizer.m.size() != ck.params.values.size() || ck.optimizer.v.size() != ck.params.values.size()))
    throw AlignmentError("checkpoint: optimizer moments do not match the parameter count");

  nlohmann::ordered_json h;
  h["model"] = model_config_to_json(ck.params.config);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& t : ck.params.layout.tensors)
    tensors.push_back({{"name", t.name}, {"offset", t.slice.offset}, {"rows", t.slice.rows}, {"cols", t.slice.cols}});
  h["tensors"] = std::move(tensors);
  h["n_values"] = ck.params.values.size();
  h["optimizer"] = {{"present", has_opt}, {"step", ck.optimizer.step}};
  h["meta"] = ck.meta;
  const std::string header = h.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out += header;
  put_doubles(out, ck.params.values);
  if (has_opt) {
    put_doubles(out, ck.optimizer.m);
    put_doubles(out, ck.optimizer.v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("checkpoint: bad magic");
  r.pos = sizeof kMagic;
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  const auto hlen = r.get<std::uint64_t>();
  r.need(hlen);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(r.pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  r.pos += hlen;

  Checkpoint ck;
  ck.params = Params(model_config_from_json(h.at("model")));
  const auto n = h.at("n_values").get<std::size_t>();
  if (n != ck.params.values.size()) throw FormatError("checkpoint: parameter count does not match the model config");
  const auto& tensors = h.at("tensors");
  if (tensors.size() != ck.params.layout.tensors.size()) throw FormatError("checkpoint: tensor table mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = ck.params.layout.tensors[i];
    if (tensors[i].at("name") != t.name || tensors[i].at("offset").get<std::size_t>() != t.slice.offset)
      throw FormatError("checkpoint: tensor '" + t.name + "' does not match the layout");
  }
  ck.params.values = r.doubles(n);
  if (h.at("optimizer").at("present").get<bool>()) {
    ck.optimizer.m = r.doubles(n);
    ck.optimizer.v = r.doubles(n);
    ck.optimizer.step = h.at("optimizer").at("step").get<std::int64_t>();
  }
  if (r.pos != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  ck.meta = h.value("meta", nlohmann::json::object());
  return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace eostb
