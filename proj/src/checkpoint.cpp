#include <bit>
#include <cstring>

#include "dcoh/models.hpp"

namespace dcoh {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'O', 'H', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPrefix = 8 + 4 + 8;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::string_view in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

ModelCheckpoint make_checkpoint(const NeuralModel& m, nlohmann::json manifest) {
  return {"neural", to_json(m.config()), to_json(m.vocab()), std::move(manifest), m.params()};
}

ModelCheckpoint make_checkpoint(const LinearModel& m, nlohmann::json manifest) {
  ModelCheckpoint c{"linear", to_json(m.config()), {{"das", m.das().tokens()}},
                    std::move(manifest), {}};
  c.params.add("linear.weights", {m.weights().size()});
  c.params[0].data = m.weights();
  return c;
}

std::string encode_checkpoint(const ModelCheckpoint& c) {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < c.params.count(); ++i) {
    tensors.push_back({{"name", c.params.name(i)},
                       {"shape", c.params[i].shape},
                       {"offset", offset},
                       {"count", c.params[i].size()}});
    offset += 4 * c.params[i].size();
  }
  const nlohmann::json header = {{"kind", c.kind},
                                 {"config", c.config},
                                 {"vocabularies", c.vocabularies},
                                 {"manifest", c.manifest},
                                 {"tensors", std::move(tensors)},
                                 {"payload_bytes", offset}};
  const std::string h = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, h.size());
  out += h;
  out.reserve(out.size() + offset + 8);
  for (std::size_t i = 0; i < c.params.count(); ++i)
    for (float x : c.params[i].data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  put_le<std::uint64_t>(out, fnv1a64(out));
  return out;
}

ModelCheckpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kPrefix + 8) throw DataError("checkpoint: truncated file");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("checkpoint: bad magic (not a checkpoint file)");
  const auto stored = get_le<std::uint64_t>(bytes, bytes.size() - 8);
  if (fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored)
    throw DataError("checkpoint: checksum mismatch (corrupt or truncated file)");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto hlen = get_le<std::uint64_t>(bytes, 12);
  if (hlen > bytes.size() - kPrefix - 8) throw DataError("checkpoint: header overruns file");

  ModelCheckpoint c;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, hlen));
    c.kind = header.at("kind").get<std::string>();
    c.config = header.at("config");
    c.vocabularies = header.at("vocabularies");
    c.manifest = header.at("manifest");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  const std::size_t payload = kPrefix + hlen;
  const std::size_t payload_bytes = bytes.size() - 8 - payload;
  try {
    if (header.at("payload_bytes").get<std::size_t>() != payload_bytes)
      throw DataError("checkpoint: payload size mismatch");
    for (const auto& t : header.at("tensors")) {
      const auto idx = c.params.add(t.at("name").get<std::string>(),
                                    t.at("shape").get<std::vector<std::size_t>>());
      auto& data = c.params[idx].data;
      const auto off = t.at("offset").get<std::size_t>();
      if (t.at("count").get<std::size_t>() != data.size() || off + 4 * data.size() > payload_bytes)
        throw DataError("checkpoint: tensor '" + c.params.name(idx) + "' out of bounds");
      for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload + off + 4 * i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint tensors: ") + e.what());
  }
  return c;
}

void save_checkpoint(const ModelCheckpoint& c, const std::string& path) {
  write_file(path, encode_checkpoint(c));
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::unique_ptr<CoherenceModel> model_from_checkpoint(const ModelCheckpoint& c) {
  if (c.kind == "neural")
    return std::make_unique<NeuralModel>(neural_config_from_json(c.config),
                                         vocabularies_from_json(c.vocabularies), c.params);
  if (c.kind == "linear") {
    if (c.params.count() != 1) throw DataError("linear checkpoint: expected one tensor");
    Vocab das;
    try {
      das = Vocab(c.vocabularies.at("das").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("linear checkpoint: ") + e.what());
    }
    return std::make_unique<LinearModel>(linear_config_from_json(c.config), std::move(das),
                                         c.params[0].data);
  }
  throw DataError("checkpoint: unknown model kind '" + c.kind + "'");
}

}  // namespace dcoh
