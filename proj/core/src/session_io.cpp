#include "pulseox/session_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace pulseox::io {

namespace {

constexpr const char* kMagic = "PPGSESSION 1";

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

// Strict CSV double field parse; rejects trailing garbage.
double parse_double(const std::string& field, const std::filesystem::path& p,
                    std::size_t line) {
  if (field.empty()) fail(p, line, "empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) {
    fail(p, line, "malformed number '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = row.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(row.substr(start));
      break;
    }
    out.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_session(const std::filesystem::path& path,
                   const seg::PpgSession& session) {
  session.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());

  nlohmann::json header;
  header["subject_id"] = session.subject_id;
  header["device"] = session.device;
  header["fs"] = session.red.fs;
  header["kind"] = session.normalized ? "normalized" : "raw";
  header["wavelengths_nm"] = {{"red", session.wavelength_red_nm},
                              {"ir", session.wavelength_ir_nm}};

  out << kMagic << "\n" << header.dump() << "\n";
  out << "SIGNALS\nt_s,red,ir\n";
  char buf[160];
  for (std::size_t i = 0; i < session.red.samples.size(); ++i) {
    const double t = static_cast<double>(i) / session.red.fs;
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t,
                  session.red.samples[i], session.ir.samples[i]);
    out << buf;
  }
  out << "LABELS\nt_s,spo2\n";
  for (const seg::LabelPoint& l : session.labels) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", l.t, l.spo2);
    out << buf;
  }
  if (!out) throw Error("write failed: " + path.string());
}

seg::PpgSession read_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open session file: " + path.string());

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    return true;
  };

  if (!next_line() || line != kMagic) {
    fail(path, line_no == 0 ? 1 : line_no, "missing PPGSESSION magic");
  }
  if (!next_line()) fail(path, line_no + 1, "missing JSON header");

  seg::PpgSession session;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    session.subject_id = header.at("subject_id").get<std::string>();
    session.device = header.at("device").get<std::string>();
    session.red.fs = header.at("fs").get<double>();
    session.ir.fs = session.red.fs;
    session.normalized =
        header.at("kind").get<std::string>() == "normalized";
    session.wavelength_red_nm =
        header.at("wavelengths_nm").at("red").get<double>();
    session.wavelength_ir_nm =
        header.at("wavelengths_nm").at("ir").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(path, line_no, std::string("bad header JSON: ") + e.what());
  }
  if (!(session.red.fs > 0.0)) fail(path, line_no, "fs must be positive");

  if (!next_line() || line != "SIGNALS") {
    fail(path, line_no, "expected SIGNALS marker");
  }
  if (!next_line() || line != "t_s,red,ir") {
    fail(path, line_no, "expected signals CSV header 't_s,red,ir'");
  }

  session.red.channel = dsp::Channel::Red;
  session.ir.channel = dsp::Channel::Ir;
  bool saw_labels = false;
  while (next_line()) {
    if (line == "LABELS") {
      saw_labels = true;
      break;
    }
    const auto fields = split_csv(line);
    if (fields.size() != 3) fail(path, line_no, "expected 3 columns");
    const double t = parse_double(fields[0], path, line_no);
    const std::size_t i = session.red.samples.size();
    const double expected_t = static_cast<double>(i) / session.red.fs;
    if (std::abs(t - expected_t) > 1e-6 * std::max(1.0, std::abs(t))) {
      fail(path, line_no, "timestamp inconsistent with header fs");
    }
    session.red.samples.push_back(parse_double(fields[1], path, line_no));
    session.ir.samples.push_back(parse_double(fields[2], path, line_no));
  }
  if (!saw_labels) fail(path, line_no, "missing LABELS block");
  if (!next_line() || line != "t_s,spo2") {
    fail(path, line_no, "expected labels CSV header 't_s,spo2'");
  }
  while (next_line()) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2) fail(path, line_no, "expected 2 columns");
    seg::LabelPoint l;
    l.t = parse_double(fields[0], path, line_no);
    l.spo2 = parse_double(fields[1], path, line_no);
    session.labels.push_back(l);
  }

  try {
    session.validate();
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return session;
}

}  // namespace pulseox::io
