// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace nmt::io {

// Every input file in the toolkit is opened through open_input so a run can
// prove, after the fact, exactly which files it touched. The fine-tuning
// audit relies on this: a regularized run must never read monolingual text.

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in);

void reset_read_audit();
const std::vector<std::string>& read_audit_log();

// Write via a temp file in the same directory, then rename. Readers never
// observe a half-written file, and a crash leaves the old content intact.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);
void ensure_dir(const std::string& path);

} // namespace nmt::io
