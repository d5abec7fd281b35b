// SPDX-License-Identifier: Apache-2.0
#include "nmt/io.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "nmt/errors.hpp"

namespace nmt::io {

namespace {
std::vector<std::string>& audit_log() {
    static std::vector<std::string> log;
    return log;
}
} // namespace

std::ifstream open_input(const std::string& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open " + path + " for reading");
    audit_log().push_back(path);
    return in;
}

void reset_read_audit() { audit_log().clear(); }

const std::vector<std::string>& read_audit_log() { return audit_log(); }

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + path + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in = open_input(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

} // namespace nmt::io
