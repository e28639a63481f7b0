#include "util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pulseox/errors.hpp"

namespace pulseox::cli {

namespace fs = std::filesystem;

std::vector<fs::path> collect_files_with_extension(
    const std::vector<std::string>& inputs, const std::string& ext) {
  std::vector<fs::path> files;
  for (const std::string& input : inputs) {
    const fs::path p(input);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) {
          files.push_back(entry.path());
        }
      }
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw Error("input path does not exist: " + input);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no input files found");
  return files;
}

std::vector<fs::path> collect_session_files(
    const std::vector<std::string>& inputs) {
  return collect_files_with_extension(inputs, ".session");
}

std::map<std::string, std::vector<seg::PpgSession>> group_by_subject(
    std::vector<seg::PpgSession> sessions) {
  std::map<std::string, std::vector<seg::PpgSession>> out;
  for (auto& s : sessions) {
    out[s.subject_id].push_back(std::move(s));
  }
  return out;
}

void ensure_out_dir(const fs::path& dir) {
  if (dir.empty()) throw Error("output directory not set");
  fs::create_directories(dir);
}

void write_trace_csv(const fs::path& path, const eval::PredictionTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace: " + path.string());
  out << "t_s,y_ref,y_pred\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", trace.t[i],
                  trace.y_ref[i], trace.y_pred[i]);
    out << buf;
  }
}

eval::PredictionTrace read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  eval::PredictionTrace trace;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line.rfind("t_s,y_ref,y_pred", 0) != 0) {
        throw ParseError(path.string() + ":1: bad trace header");
      }
      continue;
    }
    if (line.empty()) continue;
    double t, ref, pred;
    const int got = std::sscanf(line.c_str(), "%lg,%lg,%lg", &t, &ref, &pred);
    if (got != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad trace row");
    }
    trace.t.push_back(t);
    trace.y_ref.push_back(ref);
    trace.y_pred.push_back(pred);
  }
  if (trace.t.empty()) throw ParseError(path.string() + ": empty trace");
  return trace;
}

}  // namespace pulseox::cli
