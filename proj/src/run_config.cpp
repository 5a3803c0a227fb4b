#include "vqlatent/run_config.hpp"

#include <set>

#include "vqlatent/errors.hpp"
#include "vqlatent/experiments.hpp"

namespace vql {

RunConfig::RunConfig() : train(fixture_train_config()) {}

void RunConfig::validate() const {
  model.validate();
  quant.validate();
  train.validate();
  if (corpus.count == 0) throw ContractError("config: corpus.count must be positive");
  if (out_dir.empty()) throw ContractError("config: out_dir must not be empty");
}

nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"seed", c.seed},
                        {"model", to_json(c.model)},
                        {"quantizer", to_json(c.quant)},
                        {"train", to_json(c.train)},
                        {"corpus", {{"count", c.corpus.count}, {"seed", c.corpus.seed}}},
                        {"out_dir", c.out_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  static const std::set<std::string> known{"seed", "model", "quantizer", "train", "corpus", "out_dir"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("quantizer")) c.quant = quantizer_config_from_json(j.at("quantizer"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("corpus")) {
      c.corpus.count = j.at("corpus").value("count", c.corpus.count);
      c.corpus.seed = j.at("corpus").value("seed", c.corpus.seed);
    }
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

namespace {

template <typename T>
T parse_number(const char* name, const char* text) {
  const std::string s(text);
  std::size_t used = 0;
  try {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(s, &used));
    } else {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string(name) + ": not a valid number: '" + s + "'");
  }
}

}  // namespace

void apply_env(RunConfig& c, const EnvLookup& lookup) {
  if (const char* v = lookup("VQL_SEED")) c.seed = parse_number<std::uint64_t>("VQL_SEED", v);
  if (const char* v = lookup("VQL_TRAIN_SEED")) c.train.seed = parse_number<std::uint64_t>("VQL_TRAIN_SEED", v);
  if (const char* v = lookup("VQL_EPOCHS")) c.train.epochs = parse_number<std::size_t>("VQL_EPOCHS", v);
  if (const char* v = lookup("VQL_BATCH_SIZE")) c.train.batch_size = parse_number<std::size_t>("VQL_BATCH_SIZE", v);
  if (const char* v = lookup("VQL_LR")) c.train.adam.lr = parse_number<double>("VQL_LR", v);
  if (const char* v = lookup("VQL_CODEBOOK_SIZE"))
    c.quant.codebook_size = parse_number<std::size_t>("VQL_CODEBOOK_SIZE", v);
  if (const char* v = lookup("VQL_CORPUS_COUNT")) c.corpus.count = parse_number<std::size_t>("VQL_CORPUS_COUNT", v);
  if (const char* v = lookup("VQL_CORPUS_SEED")) c.corpus.seed = parse_number<std::uint64_t>("VQL_CORPUS_SEED", v);
  if (const char* v = lookup("VQL_OUT_DIR")) c.out_dir = v;
}

}  // namespace vql
