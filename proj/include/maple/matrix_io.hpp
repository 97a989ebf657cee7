#pragma once

#include <filesystem>
#include <stdexcept>

#include "maple/matrix.hpp"

namespace maple {

class MatrixIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout: 8-byte magic "MAPLEMAT", uint32 rows, uint32 cols (all
/// little-endian), then rows×cols IEEE-754 doubles in row-major order.
inline constexpr char kBinaryMagic[8] = {'M', 'A', 'P', 'L', 'E', 'M', 'A', 'T'};

DenseMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m);

DenseMatrix read_matrix_binary(const std::filesystem::path& path);
void write_matrix_binary(const std::filesystem::path& path, const DenseMatrix& m);

/// Dispatches on extension: ".csv" is text, anything else binary.
DenseMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const DenseMatrix& m);

}  // namespace maple
