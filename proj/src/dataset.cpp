#include "arcade/dataset.hpp"

#include <cstring>
#include <fstream>

#include "arcade/errors.hpp"
#include "arcade/io.hpp"

namespace arcade::dataset {

namespace {
constexpr char kMagic[4] = {'A', 'R', 'C', 'D'};
}

std::vector<double> SampleSet::row(std::int64_t i) const {
  const std::int64_t width = w();
  std::vector<double> out(static_cast<std::size_t>(width));
  std::memcpy(out.data(), values.data() + i * width,
              static_cast<std::size_t>(width) * sizeof(double));
  return out;
}

void SampleSet::validate() const {
  if (n < 1 || l < 1) throw ConfigError("SampleSet: n and l must be >= 1");
  if (values.rank() != 2 || values.dim(1) != w())
    throw ConfigError("SampleSet: values must be [count, n*l]");
  if (labeled && static_cast<std::int64_t>(labels.size()) != count())
    throw ConfigError("SampleSet: label count mismatch");
}

void write_arcd(const std::string& path, const SampleSet& s) {
  s.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  io::write_bytes(os, kMagic, 4);
  io::write_le<std::uint16_t>(os, 1);
  io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.n));
  io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.l));
  io::write_le<std::uint16_t>(os, 0);
  io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(s.count()));
  for (std::int64_t i = 0; i < s.values.numel(); ++i)
    io::write_f32(os, static_cast<float>(s.values[i]));
  io::write_le<std::uint8_t>(os, s.labeled ? 1 : 0);
  if (s.labeled)
    for (auto b : s.labels) io::write_le<std::uint8_t>(os, b);
  if (!os) throw IoError("write failed: " + path);
}

SampleSet read_arcd(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("not a sample file (bad magic): " + path);
  const auto version = io::read_le<std::uint16_t>(is);
  if (version != 1) throw ParseError("unsupported sample file version");
  SampleSet s;
  s.n = io::read_le<std::uint16_t>(is);
  s.l = io::read_le<std::uint16_t>(is);
  io::read_le<std::uint16_t>(is);  // reserved
  const auto count = static_cast<std::int64_t>(io::read_le<std::uint64_t>(is));
  if (s.n < 1 || s.l < 1) throw ParseError("sample file: invalid n/l");
  s.values = Tensor({count, s.w()});
  for (std::int64_t i = 0; i < s.values.numel(); ++i)
    s.values[i] = static_cast<double>(io::read_f32(is));
  const auto present = io::read_le<std::uint8_t>(is);
  if (present == 1) {
    s.labeled = true;
    s.labels.resize(static_cast<std::size_t>(count));
    for (auto& b : s.labels) b = io::read_le<std::uint8_t>(is);
  } else if (present != 0) {
    throw ParseError("sample file: bad label presence flag");
  }
  return s;
}

SampleSet subset(const SampleSet& s, const std::vector<std::int64_t>& rows) {
  SampleSet out;
  out.n = s.n;
  out.l = s.l;
  out.labeled = s.labeled;
  const std::int64_t w = s.w();
  out.values = Tensor({static_cast<std::int64_t>(rows.size()), w});
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.values.data() + static_cast<std::int64_t>(i) * w,
                s.values.data() + rows[i] * w,
                static_cast<std::size_t>(w) * sizeof(double));
    if (s.labeled) out.labels.push_back(s.labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

}  // namespace arcade::dataset
