// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the thermocal Project.

#include "thermocal/param_io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "thermocal/errors.hpp"

namespace thermocal {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw ContractViolation("format_double failed");
  return std::string(buf, end);
}

void write_chain_jsonl(std::ostream& out, const ParamChain& chain) {
  for (const auto& entry : chain) {
    nlohmann::ordered_json record;
    record["frame"] = entry.to;
    record["a_1t"] = entry.a;
    record["b_1t"] = entry.b;
    out << record.dump() << '\n';
  }
}

void write_chain_csv(std::ostream& out, const ParamChain& chain) {
  out << "frame,a_1t,b_1t\n";
  for (const auto& entry : chain) {
    out << entry.to << ',' << format_double(entry.a) << ',' << format_double(entry.b) << '\n';
  }
}

void write_chain_jsonl(const fs::path& path, const ParamChain& chain) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_chain_jsonl(out, chain);
}

void write_chain_csv(const fs::path& path, const ParamChain& chain) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_chain_csv(out, chain);
}

ParamChain read_chain_jsonl(std::istream& in) {
  ParamChain chain;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      const auto frame = record.at("frame").get<FrameIndex>();
      const double a = record.at("a_1t").get<double>();
      const double b = record.at("b_1t").get<double>();
      const FrameIndex ref = chain.empty() ? frame : chain.reference_frame();
      chain.push_back({a, b, ref, frame});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad chain record: ") + e.what(), line_no);
    } catch (const ContractViolation& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return chain;
}

ParamChain read_chain_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing parameter chain " + path.string());
  return read_chain_jsonl(in);
}

}  // namespace thermocal
