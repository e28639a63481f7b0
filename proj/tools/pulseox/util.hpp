#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pulseox/eval.hpp"
#include "pulseox/segmentation.hpp"

namespace pulseox::cli {

// Expands a mix of files and directories into a sorted list of *.session
// files (directories are scanned non-recursively).
std::vector<std::filesystem::path> collect_session_files(
    const std::vector<std::string>& inputs);

std::vector<std::filesystem::path> collect_files_with_extension(
    const std::vector<std::string>& inputs, const std::string& ext);

std::map<std::string, std::vector<seg::PpgSession>> group_by_subject(
    std::vector<seg::PpgSession> sessions);

void ensure_out_dir(const std::filesystem::path& dir);

// Trace CSV: "t_s,y_ref,y_pred" with an optional trailing is_instant column.
void write_trace_csv(const std::filesystem::path& path,
                     const eval::PredictionTrace& trace);
eval::PredictionTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace pulseox::cli
