#include "wxaug/io.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace wxaug {

namespace fs = std::filesystem;

namespace {

template <typename Container>
Container slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Container(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const char* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string read_text_file(const fs::path& path) { return slurp<std::string>(path); }

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  return slurp<std::vector<std::uint8_t>>(path);
}

void write_file(const fs::path& path, std::string_view contents) {
  write_bytes(path, contents.data(), contents.size());
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& contents) {
  write_bytes(path, reinterpret_cast<const char*>(contents.data()), contents.size());
}

}  // namespace wxaug
