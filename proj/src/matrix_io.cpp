#include "maple/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maple/format.hpp"

namespace maple {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary matrix format assumes a little-endian host");

double parse_double(std::string_view token, std::size_t line_no) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() &&
         (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw MatrixIoError("csv line " + std::to_string(line_no) + ": cannot parse '" +
                        std::string(token) + "'");
  }
  return value;
}

bool has_csv_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

}  // namespace

DenseMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MatrixIoError("cannot open " + path.string());
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      data.push_back(parse_double(rest.substr(0, comma), line_no));
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw MatrixIoError("csv line " + std::to_string(line_no) + ": expected " +
                          std::to_string(cols) + " fields, found " + std::to_string(count));
    }
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw MatrixIoError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw MatrixIoError("write failed for " + path.string());
}

DenseMatrix read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MatrixIoError("cannot open " + path.string());
  std::array<char, 16> header{};
  if (!in.read(header.data(), header.size())) {
    throw MatrixIoError(path.string() + ": truncated header");
  }
  if (std::memcmp(header.data(), kBinaryMagic, sizeof(kBinaryMagic)) != 0) {
    throw MatrixIoError(path.string() + ": bad magic");
  }
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::memcpy(&rows, header.data() + 8, 4);
  std::memcpy(&cols, header.data() + 12, 4);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  if (!data.empty() &&
      !in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)))) {
    throw MatrixIoError(path.string() + ": truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw MatrixIoError(path.string() + ": trailing bytes after payload");
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void write_matrix_binary(const std::filesystem::path& path, const DenseMatrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
    throw MatrixIoError("matrix too large for binary format");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MatrixIoError("cannot write " + path.string());
  std::array<char, 16> header{};
  std::memcpy(header.data(), kBinaryMagic, sizeof(kBinaryMagic));
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  std::memcpy(header.data() + 8, &rows, 4);
  std::memcpy(header.data() + 12, &cols, 4);
  out.write(header.data(), header.size());
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw MatrixIoError("write failed for " + path.string());
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
  return has_csv_extension(path) ? read_matrix_csv(path) : read_matrix_binary(path);
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  if (has_csv_extension(path)) {
    write_matrix_csv(path, m);
  } else {
    write_matrix_binary(path, m);
  }
}

}  // namespace maple
