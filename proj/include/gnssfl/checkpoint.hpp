#pragma once

// Checkpoint file: a text manifest terminated by a line "data", followed by
// the parameters as a flat block of little-endian IEEE-754 binary32 values.
//
//   gnssfl-checkpoint v1
//   input 36
//   hidden 100
//   params 135301
//   block lstm1.wx 0 36 400
//   ...
//   data
//   <params * 4 bytes>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gnssfl/errors.hpp"
#include "gnssfl/lstm.hpp"

namespace gnssfl {

inline void save_checkpoint(const LstmModelParams& p, const std::filesystem::path& path) {
  require(p.values.size() == p.layout.param_count(), "save_checkpoint: parameter count does not match layout");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << "gnssfl-checkpoint v1\n"
      << "input " << p.layout.input << '\n'
      << "hidden " << p.layout.hidden << '\n'
      << "params " << p.layout.param_count() << '\n';
  for (const auto& b : p.layout.manifest())
    out << "block " << b.name << ' ' << b.offset << ' ' << b.rows << ' ' << b.cols << '\n';
  out << "data\n";
  std::string block(p.values.size() * 4, '\0');
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(p.values[i]);
    for (int k = 0; k < 4; ++k) block[i * 4 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
  }
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

inline LstmModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "gnssfl-checkpoint v1") throw DataError("not a checkpoint file: " + path.string());
  ModelLayout layout;
  std::size_t count = 0;
  while (std::getline(in, line) && line != "data") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "input")
      ls >> layout.input;
    else if (key == "hidden")
      ls >> layout.hidden;
    else if (key == "params")
      ls >> count;
    else if (key != "block")
      throw DataError("checkpoint: unknown manifest key '" + key + "' in " + path.string());
  }
  if (line != "data") throw DataError("checkpoint: missing data section in " + path.string());
  if (count != layout.param_count()) throw DataError("checkpoint: parameter count disagrees with layout");
  LstmModelParams p(layout);
  std::string block(count * 4, '\0');
  in.read(block.data(), static_cast<std::streamsize>(block.size()));
  if (static_cast<std::size_t>(in.gcount()) != block.size()) throw DataError("checkpoint: truncated data block");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(block[i * 4 + static_cast<std::size_t>(k)])) << (8 * k);
    p.values[i] = std::bit_cast<float>(bits);
  }
  return p;
}

}  // namespace gnssfl
