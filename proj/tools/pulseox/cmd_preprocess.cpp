#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "pulseox/pipeline.hpp"
#include "pulseox/session_io.hpp"
#include "util.hpp"

namespace pulseox::cli {

int run_preprocess(const PreprocessOptions& opts) {
  const auto files = collect_session_files(opts.inputs);
  ensure_out_dir(opts.out_dir);

  pipe::PreprocessOptions popts;
  popts.fs_target = opts.fs_target;

  nlohmann::json log;
  for (const auto& file : files) {
    const seg::PpgSession raw = io::read_session(file);
    const pipe::PreprocessResult pre = pipe::preprocess_session(raw, popts);
    const auto out_path =
        std::filesystem::path(opts.out_dir) / file.filename();
    io::write_session(out_path, pre.normalized);
    log[file.filename().string()] = {
        {"degenerate_red", pre.degenerate_red},
        {"degenerate_ir", pre.degenerate_ir},
    };
  }

  std::ofstream log_out(std::filesystem::path(opts.out_dir) /
                        "preprocess_log.json");
  log_out << log.dump(2) << "\n";
  std::fprintf(stderr, "preprocess: wrote %zu normalized sessions to %s\n",
               files.size(), opts.out_dir.c_str());
  return 0;
}

}  // namespace pulseox::cli
