#include "pulseox/experiment.hpp"

#include <fstream>

#include <json.hpp>

namespace pulseox::io {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open experiment config: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad JSON: " + e.what());
  }

  ExperimentConfig cfg;
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "batch", cfg.train.batch);
    maybe(t, "pretrain_epochs", cfg.train.pretrain_epochs);
    maybe(t, "finetune_epochs", cfg.train.finetune_epochs);
    maybe(t, "finetune_stage1_epochs", cfg.train.finetune_stage1_epochs);
    maybe(t, "bins", cfg.train.bins);
    maybe(t, "seed", cfg.train.seed);
    maybe(t, "shuffle", cfg.train.shuffle);
    maybe(t, "weighted_pretrain", cfg.train.weighted_pretrain);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    maybe(m, "hidden", cfg.model.hidden);
    maybe(m, "layers", cfg.model.layers);
    maybe(m, "use_attention", cfg.model.use_attention);
    maybe(m, "input_dim", cfg.model.input_dim);
    maybe(m, "seq_len", cfg.model.seq_len);
    maybe(m, "seed", cfg.model.seed);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    maybe(s, "kind", cfg.split.kind);
    maybe(s, "test_fraction", cfg.split.test_fraction);
    maybe(s, "k", cfg.split.k);
    maybe(s, "seed", cfg.split.seed);
  }
  std::string sessions_dir, out_dir;
  maybe(j, "sessions_dir", sessions_dir);
  maybe(j, "out_dir", out_dir);
  cfg.sessions_dir = sessions_dir;
  cfg.out_dir = out_dir;

  if (cfg.split.kind != "subject" && cfg.split.kind != "kfold" &&
      cfg.split.kind != "loso") {
    throw InvalidSpecError("split.kind must be subject, kfold or loso");
  }
  cfg.train.validate();
  return cfg;
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["train"] = {{"lr", train.lr},
                {"batch", train.batch},
                {"pretrain_epochs", train.pretrain_epochs},
                {"finetune_epochs", train.finetune_epochs},
                {"finetune_stage1_epochs", train.finetune_stage1_epochs},
                {"bins", train.bins},
                {"seed", train.seed},
                {"shuffle", train.shuffle},
                {"weighted_pretrain", train.weighted_pretrain}};
  j["model"] = {{"hidden", model.hidden},
                {"layers", model.layers},
                {"use_attention", model.use_attention},
                {"input_dim", model.input_dim},
                {"seq_len", model.seq_len},
                {"seed", model.seed}};
  j["split"] = {{"kind", split.kind},
                {"test_fraction", split.test_fraction},
                {"k", split.k},
                {"seed", split.seed}};
  j["sessions_dir"] = sessions_dir.string();
  j["out_dir"] = out_dir.string();

  std::ofstream out(path);
  if (!out) throw Error("cannot write experiment config: " + path.string());
  out << j.dump(2) << "\n";
}

void ExperimentConfig::validate_paths() const {
  if (!std::filesystem::exists(sessions_dir)) {
    throw Error("sessions_dir does not exist: " + sessions_dir.string());
  }
}

}  // namespace pulseox::io
