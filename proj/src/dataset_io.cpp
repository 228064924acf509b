#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "tagopt/data.hpp"
#include "tagopt/errors.hpp"
#include "tagopt/io.hpp"

namespace tagopt {

namespace {

std::string at_offset(std::uint64_t offset) { return " at byte offset " + std::to_string(offset); }

// Sequential big-endian reader that reports the byte offset of any failure.
class BigEndianReader {
 public:
  BigEndianReader(std::istream& in, const char* name) : in_(in), name_(name) {}

  void read_bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw FormatError(std::string("idx ") + name_ + ": truncated file" + at_offset(offset_ + got));
    }
    offset_ += n;
  }

  std::uint32_t u32() {
    std::array<unsigned char, 4> b{};
    read_bytes(b.data(), 4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
  }

  // One element of IDX type `code`, widened to double.
  double element(unsigned char code) {
    std::array<unsigned char, 8> b{};
    switch (code) {
      case 0x08: read_bytes(b.data(), 1); return static_cast<double>(b[0]);
      case 0x09: read_bytes(b.data(), 1); return static_cast<double>(static_cast<std::int8_t>(b[0]));
      case 0x0B: {
        read_bytes(b.data(), 2);
        return static_cast<double>(static_cast<std::int16_t>((b[0] << 8) | b[1]));
      }
      case 0x0C: {
        read_bytes(b.data(), 4);
        const std::uint32_t u = (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
                                (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
        return static_cast<double>(static_cast<std::int32_t>(u));
      }
      case 0x0D: {
        read_bytes(b.data(), 4);
        std::uint32_t u = 0;
        for (int i = 0; i < 4; ++i) u = (u << 8) | b[static_cast<std::size_t>(i)];
        return static_cast<double>(std::bit_cast<float>(u));
      }
      case 0x0E: {
        read_bytes(b.data(), 8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u = (u << 8) | b[static_cast<std::size_t>(i)];
        return std::bit_cast<double>(u);
      }
      default: break;
    }
    throw FormatError(std::string("idx ") + name_ + ": unknown element type" + at_offset(offset_));
  }

  std::uint64_t offset() const noexcept { return offset_; }
  const char* name() const noexcept { return name_; }

 private:
  std::istream& in_;
  const char* name_;
  std::uint64_t offset_ = 0;
};

struct IdxHeader {
  unsigned char type = 0;
  std::vector<std::uint32_t> dims;
};

IdxHeader read_idx_header(BigEndianReader& r) {
  std::array<unsigned char, 4> magic{};
  r.read_bytes(magic.data(), 4);
  if (magic[0] != 0 || magic[1] != 0) {
    throw FormatError(std::string("idx ") + r.name() + ": bad magic number" + at_offset(0));
  }
  IdxHeader h;
  h.type = magic[2];
  if (h.type != 0x08 && h.type != 0x09 && h.type != 0x0B && h.type != 0x0C && h.type != 0x0D &&
      h.type != 0x0E) {
    throw FormatError(std::string("idx ") + r.name() + ": unknown magic number" + at_offset(2));
  }
  if (magic[3] == 0) {
    throw FormatError(std::string("idx ") + r.name() + ": zero dimensions" + at_offset(3));
  }
  for (int i = 0; i < magic[3]; ++i) h.dims.push_back(r.u32());
  return h;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

LabeledDataset read_csv_dataset(std::istream& in) {
  LabeledDataset ds;
  std::vector<double> values;
  std::size_t width = 0;
  int max_label = -1;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    const auto text = io::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto cells = io::split(text, ',');
    if (cells.size() < 2) {
      throw FormatError("csv: need at least one feature and a label" + at_offset(line_start));
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw FormatError("csv: expected " + std::to_string(width) + " columns, found " +
                        std::to_string(cells.size()) + at_offset(line_start));
    }
    try {
      for (std::size_t j = 0; j + 1 < cells.size(); ++j) values.push_back(io::parse_double(cells[j]));
      const auto label = io::parse_int(cells.back());
      if (label < 0) throw FormatError("negative label");
      ds.labels.push_back(static_cast<int>(label));
      max_label = std::max(max_label, static_cast<int>(label));
    } catch (const FormatError& e) {
      throw FormatError(std::string("csv: ") + e.what() + at_offset(line_start));
    }
  }
  if (ds.labels.empty()) throw FormatError("csv: no examples");
  ds.features = Matrix(ds.labels.size(), width - 1, std::move(values));
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  ds.validate();
  return ds;
}

LabeledDataset read_idx_dataset(std::istream& images, std::istream& labels) {
  BigEndianReader ri(images, "images");
  BigEndianReader rl(labels, "labels");
  const auto hi = read_idx_header(ri);
  const auto hl = read_idx_header(rl);
  if (hl.dims.size() != 1) {
    throw FormatError("idx labels: expected one dimension" + at_offset(3));
  }
  if (hi.dims.front() != hl.dims.front()) {
    throw FormatError("idx: image count " + std::to_string(hi.dims.front()) + " != label count " +
                      std::to_string(hl.dims.front()) + at_offset(4));
  }
  const std::size_t n = hi.dims.front();
  std::size_t width = 1;
  for (std::size_t i = 1; i < hi.dims.size(); ++i) width *= hi.dims[i];

  std::vector<double> values(n * width);
  for (double& v : values) v = ri.element(hi.type);
  LabeledDataset ds;
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto at = rl.offset();
    const double y = rl.element(hl.type);
    if (!(y >= 0.0) || y != std::floor(y)) {
      throw FormatError("idx labels: label is not a non-negative integer" + at_offset(at));
    }
    ds.labels.push_back(static_cast<int>(y));
    max_label = std::max(max_label, static_cast<int>(y));
  }
  ds.features = Matrix(n, width, std::move(values));
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  ds.validate();
  return ds;
}

LabeledDataset load_flat_dataset(const std::filesystem::path& path, DatasetFormat format,
                                 const std::filesystem::path& labels_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file " + path.string());
  if (format == DatasetFormat::kCsv) return read_csv_dataset(in);
  if (labels_path.empty()) throw ConfigError("idx dataset requires a labels file");
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open label file " + labels_path.string());
  return read_idx_dataset(in, lab);
}

void write_csv_dataset(const LabeledDataset& ds, std::ostream& out) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features.row(i)) out << io::format_double(v) << ',';
    out << ds.labels[i] << '\n';
  }
}

void export_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_csv_dataset(ds, out);
}

void export_idx(const LabeledDataset& ds, const std::filesystem::path& images,
                const std::filesystem::path& labels) {
  std::ofstream oi(images, std::ios::binary);
  std::ofstream ol(labels, std::ios::binary);
  if (!oi || !ol) throw FormatError("cannot write idx files");
  oi.write("\0\0\x0e\x02", 4);
  put_u32(oi, static_cast<std::uint32_t>(ds.size()));
  put_u32(oi, static_cast<std::uint32_t>(ds.dim()));
  for (double v : ds.features.values()) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int s = 56; s >= 0; s -= 8) oi.put(static_cast<char>(u >> s));
  }
  ol.write("\0\0\x0c\x01", 4);
  put_u32(ol, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) put_u32(ol, static_cast<std::uint32_t>(y));
}

}  // namespace tagopt
