#include "intentspan/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace intentspan {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a_bytes(const std::string& s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t vocab_hash(const Vocab& vocab) {
  std::uint64_t h = kFnvOffset;
  for (const auto& token : vocab.index_to_token) {
    h = fnv1a_bytes(token, h);
    h ^= 0x1f;  // unit separator between tokens
    h *= kFnvPrime;
  }
  return h;
}

void save_checkpoint(const Model<double>& model, const Taxonomy& taxonomy,
                     std::uint64_t train_seed, std::size_t epoch, const std::string& path) {
  ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;

  const EncoderConfig& enc = model.encoder_config();
  doc["encoder"] = {{"vocab_size", enc.vocab_size},
                    {"embed_dim", enc.embed_dim},
                    {"contextual", enc.contextual},
                    {"dropout_rate", enc.dropout_rate}};

  const DecoderConfig& dec = model.decoder_config();
  doc["decoder"] = {{"hidden_dim", dec.hidden_dim},
                    {"pointer_hidden", dec.pointer_hidden},
                    {"n_slots", dec.n_slots},
                    {"n_steps", dec.n_steps},
                    {"dropout_rate", dec.dropout_rate},
                    {"sum_tuple_history", dec.sum_tuple_history}};

  doc["vocab"] = model.vocab().index_to_token;
  doc["vocab_hash"] = hex64(vocab_hash(model.vocab()));
  doc["taxonomy"] = {{"dataset", taxonomy.dataset_name()},
                     {"coarse_to_fine", taxonomy.coarse_to_fine()}};
  doc["init_seed"] = model.init_seed();
  doc["train_seed"] = train_seed;
  doc["epoch"] = epoch;

  json params = json::array();
  for (const auto& p : model.params().all()) {
    json entry;
    entry["name"] = p.name;
    entry["rows"] = p.value.rows();
    entry["cols"] = p.value.cols();
    std::vector<double> data(static_cast<std::size_t>(p.value.size()));
    // column-major, Eigen's native order
    Eigen::Map<Mat<double>>(data.data(), p.value.rows(), p.value.cols()) = p.value;
    entry["data"] = std::move(data);
    params.push_back(std::move(entry));
  }
  doc["params"] = std::move(params);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << doc.dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': invalid JSON: " + e.what());
  }

  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
    throw ParseError("checkpoint '" + path + "': missing format_version");
  const int version = doc["format_version"].get<int>();
  if (version != kCheckpointFormatVersion)
    throw ValidationError("checkpoint '" + path + "' has format version " +
                          std::to_string(version) + "; this build reads version " +
                          std::to_string(kCheckpointFormatVersion));

  try {
    LoadedCheckpoint out;

    EncoderConfig enc;
    enc.vocab_size = doc.at("encoder").at("vocab_size").get<std::size_t>();
    enc.embed_dim = doc.at("encoder").at("embed_dim").get<Eigen::Index>();
    enc.contextual = doc.at("encoder").at("contextual").get<bool>();
    enc.dropout_rate = doc.at("encoder").at("dropout_rate").get<double>();

    DecoderConfig dec;
    dec.hidden_dim = doc.at("decoder").at("hidden_dim").get<Eigen::Index>();
    dec.pointer_hidden = doc.at("decoder").at("pointer_hidden").get<Eigen::Index>();
    dec.n_slots = doc.at("decoder").at("n_slots").get<std::size_t>();
    dec.n_steps = doc.at("decoder").at("n_steps").get<std::size_t>();
    dec.dropout_rate = doc.at("decoder").at("dropout_rate").get<double>();
    dec.sum_tuple_history = doc.at("decoder").at("sum_tuple_history").get<bool>();

    Vocab vocab;
    vocab.index_to_token = doc.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < vocab.index_to_token.size(); ++i)
      vocab.token_to_index[vocab.index_to_token[i]] = i;
    const std::string stored_hash = doc.at("vocab_hash").get<std::string>();
    const std::string actual_hash = hex64(vocab_hash(vocab));
    if (stored_hash != actual_hash)
      throw ValidationError("checkpoint '" + path + "': vocab hash mismatch (stored " +
                            stored_hash + ", computed " + actual_hash + ")");

    out.taxonomy = std::make_unique<Taxonomy>(
        doc.at("taxonomy").at("dataset").get<std::string>(),
        doc.at("taxonomy").at("coarse_to_fine")
            .get<std::map<std::string, std::vector<std::string>>>());
    out.train_seed = doc.at("train_seed").get<std::uint64_t>();
    out.epoch = doc.at("epoch").get<std::size_t>();

    out.model = std::make_unique<Model<double>>(enc, dec, std::move(vocab), *out.taxonomy,
                                                doc.at("init_seed").get<std::uint64_t>());

    const json& params = doc.at("params");
    auto& store = out.model->params().all();
    if (params.size() != store.size())
      throw ValidationError("checkpoint '" + path + "': expected " +
                            std::to_string(store.size()) + " parameters, found " +
                            std::to_string(params.size()));
    std::size_t i = 0;
    for (auto& p : store) {
      const json& entry = params[i++];
      if (entry.at("name").get<std::string>() != p.name)
        throw ValidationError("checkpoint '" + path + "': parameter " + std::to_string(i - 1) +
                              " is '" + entry.at("name").get<std::string>() + "', expected '" +
                              p.name + "'");
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (rows != p.value.rows() || cols != p.value.cols())
        throw ValidationError("checkpoint '" + path + "': parameter '" + p.name +
                              "' has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", expected " +
                              std::to_string(p.value.rows()) + "x" +
                              std::to_string(p.value.cols()));
      const auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(p.value.size()))
        throw ValidationError("checkpoint '" + path + "': parameter '" + p.name +
                              "' has wrong element count");
      p.value = Eigen::Map<const Mat<double>>(data.data(), rows, cols);
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace intentspan
