// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "thermocal/photo_model.hpp"

namespace thermocal {

// One record per frame with fields `frame`, `a_1t`, `b_1t` (1-referenced).

void write_chain_jsonl(std::ostream& out, const ParamChain& chain);
void write_chain_csv(std::ostream& out, const ParamChain& chain);
void write_chain_jsonl(const std::filesystem::path& path, const ParamChain& chain);
void write_chain_csv(const std::filesystem::path& path, const ParamChain& chain);

/// Parses the JSON-lines form. Throws ParseError naming the offending line.
ParamChain read_chain_jsonl(std::istream& in);
ParamChain read_chain_jsonl(const std::filesystem::path& path);

/// Shortest text form that round-trips a double.
std::string format_double(double value);

}  // namespace thermocal
