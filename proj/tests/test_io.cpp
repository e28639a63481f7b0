#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "pulseox/checkpoint.hpp"
#include "pulseox/experiment.hpp"
#include "pulseox/hash.hpp"
#include "pulseox/rng.hpp"
#include "pulseox/session_io.hpp"
#include "pulseox/synth.hpp"

using namespace pulseox;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pulseox_io_test_" + std::to_string(Rng(::getpid()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("session write/read round trip is lossless") {
  TempDir tmp;
  synth::SynthConfig cfg;
  cfg.duration_s = 60.0;
  cfg.holds.count = 1;
  cfg.seed = 8;
  const auto session = synth::generate_session(cfg);

  const auto p1 = tmp.path / "a.session";
  io::write_session(p1, session);
  const auto back = io::read_session(p1);

  CHECK(back.subject_id == session.subject_id);
  CHECK(back.device == session.device);
  CHECK(back.normalized == session.normalized);
  CHECK(back.red.fs == session.red.fs);
  REQUIRE(back.red.samples.size() == session.red.samples.size());
  CHECK(fnv1a(back.red.samples) == fnv1a(session.red.samples));
  CHECK(fnv1a(back.ir.samples) == fnv1a(session.ir.samples));
  REQUIRE(back.labels.size() == session.labels.size());
  for (std::size_t i = 0; i < back.labels.size(); ++i) {
    CHECK(back.labels[i].t == session.labels[i].t);
    CHECK(back.labels[i].spo2 == session.labels[i].spo2);
  }

  // Second write produces byte-identical files.
  const auto p2 = tmp.path / "b.session";
  io::write_session(p2, back);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("session parser reports the offending line") {
  TempDir tmp;
  synth::SynthConfig cfg;
  cfg.duration_s = 30.0;
  cfg.holds.count = 1;
  cfg.seed = 8;
  const auto session = synth::generate_session(cfg);
  const auto p = tmp.path / "broken.session";
  io::write_session(p, session);

  // Corrupt row 10 (a signals row).
  std::string text = slurp(p);
  std::size_t pos = 0;
  for (int line = 1; line < 10; ++line) pos = text.find('\n', pos) + 1;
  const std::size_t end = text.find('\n', pos);
  text.replace(pos, end - pos, "0.36,not_a_number,1.0");
  std::ofstream(p, std::ios::binary) << text;

  try {
    io::read_session(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find(":10:") != std::string::npos);
  }
}

TEST_CASE("session parser rejects wrong magic and bad headers") {
  TempDir tmp;
  const auto p = tmp.path / "bad.session";
  std::ofstream(p) << "NOT A SESSION\n";
  CHECK_THROWS_AS(io::read_session(p), ParseError);

  std::ofstream(p, std::ios::trunc)
      << "PPGSESSION 1\n{\"subject_id\": broken\n";
  CHECK_THROWS_AS(io::read_session(p), ParseError);
}

TEST_CASE("checkpoint round trip is bitwise") {
  TempDir tmp;
  nn::ModelConfig mc;
  mc.hidden = 6;
  mc.seq_len = 20;
  mc.seed = 123;
  io::Checkpoint ckpt;
  ckpt.model = nn::ModelParams::init(mc);
  ckpt.model->trainable = nn::TrainableFlags::bilstm_and_fc();
  ckpt.quad = calib::QuadCalib{104.0, -17.0, -2.0};

  const auto p1 = tmp.path / "a.ckpt";
  io::save_checkpoint(p1, ckpt);
  const auto back = io::load_checkpoint(p1);

  REQUIRE(back.model.has_value());
  CHECK(back.model->config == mc);
  CHECK(back.model->trainable == nn::TrainableFlags::bilstm_and_fc());
  for (auto g : {nn::ParamGroup::Bilstm, nn::ParamGroup::Attention,
                 nn::ParamGroup::Fc}) {
    CHECK(back.model->group_hash(g) == ckpt.model->group_hash(g));
  }
  REQUIRE(back.quad.has_value());
  CHECK(back.quad->c0 == 104.0);
  CHECK(back.quad->c1 == -17.0);
  CHECK(back.quad->c2 == -2.0);

  const auto p2 = tmp.path / "b.ckpt";
  io::save_checkpoint(p2, back);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("calib-only checkpoint") {
  TempDir tmp;
  io::Checkpoint ckpt;
  ckpt.quad = calib::QuadCalib{110.0, -25.0, 0.0};
  const auto p = tmp.path / "calib.ckpt";
  io::save_checkpoint(p, ckpt);
  const auto back = io::load_checkpoint(p);
  CHECK_FALSE(back.model.has_value());
  REQUIRE(back.quad.has_value());
  CHECK(back.quad->c1 == -25.0);
}

TEST_CASE("unknown checkpoint version is refused") {
  TempDir tmp;
  io::Checkpoint ckpt;
  ckpt.quad = calib::QuadCalib{1, 2, 3};
  const auto p = tmp.path / "v.ckpt";
  io::save_checkpoint(p, ckpt);

  std::string bytes = slurp(p);
  bytes[8] = 42;  // bump the version field
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
  CHECK_THROWS_AS(io::load_checkpoint(p), ParseError);
}

TEST_CASE("empty checkpoint is rejected on save") {
  TempDir tmp;
  io::Checkpoint empty;
  CHECK_THROWS_AS(io::save_checkpoint(tmp.path / "x.ckpt", empty),
                  InvalidSpecError);
}

TEST_CASE("experiment config round trip and validation") {
  TempDir tmp;
  io::ExperimentConfig cfg;
  cfg.train.batch = 64;
  cfg.train.seed = 5;
  cfg.model.hidden = 16;
  cfg.split.kind = "kfold";
  cfg.split.k = 4;
  cfg.sessions_dir = tmp.path;
  cfg.out_dir = tmp.path / "out";

  const auto p = tmp.path / "exp.json";
  cfg.save(p);
  const auto back = io::ExperimentConfig::load(p);
  CHECK(back.train.batch == 64);
  CHECK(back.model.hidden == 16);
  CHECK(back.split.kind == "kfold");
  CHECK(back.split.k == 4);
  CHECK(back.sessions_dir == tmp.path);
  back.validate_paths();

  io::ExperimentConfig missing = back;
  missing.sessions_dir = tmp.path / "nope";
  CHECK_THROWS(missing.validate_paths());
}

TEST_CASE("experiment config rejects bad split kinds and stage splits") {
  TempDir tmp;
  const auto p = tmp.path / "bad.json";
  std::ofstream(p) << R"({"split": {"kind": "bogus"}})";
  CHECK_THROWS_AS(io::ExperimentConfig::load(p), InvalidSpecError);

  std::ofstream(p, std::ios::trunc)
      << R"({"train": {"finetune_epochs": 10, "finetune_stage1_epochs": 10}})";
  CHECK_THROWS_AS(io::ExperimentConfig::load(p), InvalidSpecError);
}
